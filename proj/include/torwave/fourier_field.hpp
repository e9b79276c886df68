#pragma once

// Real fields on the d-torus stored as finite Hermitian-symmetric maps
// k -> c_k against the plain exponentials e^{ik.x}.  Norms are normalized so
// that the L2 norm of f is sqrt(mean |f|^2) = sqrt(sum |c_k|^2).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "torwave/errors.hpp"

namespace torwave {

using Complex = std::complex<double>;

/// Largest supported torus dimension.
inline constexpr int kMaxDim = 4;

/// Relative modulus below which coefficients are dropped.
inline constexpr double kDefaultPrune = 1e-14;

/// Integer wave vector k in Z^d.
class ModeIndex {
 public:
  ModeIndex() = default;

  explicit ModeIndex(int dim) : dim_(checked_dim(dim)) {}

  ModeIndex(std::initializer_list<int> components)
      : ModeIndex(std::span<const int>(components.begin(), components.size())) {}

  explicit ModeIndex(std::span<const int> components)
      : dim_(checked_dim(static_cast<int>(components.size()))) {
    std::copy(components.begin(), components.end(), comps_.begin());
  }

  static ModeIndex zero(int dim) { return ModeIndex(dim); }

  /// sign * e_axis, axis is 0-based.
  static ModeIndex unit(int dim, int axis, int sign = 1) {
    ModeIndex k(dim);
    if (axis < 0 || axis >= dim) throw std::out_of_range("unit vector axis out of range");
    k.comps_[static_cast<std::size_t>(axis)] = sign;
    return k;
  }

  int dim() const noexcept { return dim_; }
  int operator[](int i) const { return comps_[static_cast<std::size_t>(i)]; }
  int& operator[](int i) { return comps_[static_cast<std::size_t>(i)]; }

  bool is_zero() const noexcept {
    return std::all_of(comps_.begin(), comps_.end(), [](int c) { return c == 0; });
  }

  /// |k|^2, the Laplacian eigenvalue.
  std::int64_t norm_sq() const noexcept {
    std::int64_t s = 0;
    for (int c : comps_) s += static_cast<std::int64_t>(c) * c;
    return s;
  }

  int max_abs() const noexcept {
    int m = 0;
    for (int c : comps_) m = std::max(m, std::abs(c));
    return m;
  }

  int l1() const noexcept {
    int s = 0;
    for (int c : comps_) s += std::abs(c);
    return s;
  }

  ModeIndex operator-() const {
    ModeIndex r = *this;
    for (auto& c : r.comps_) c = -c;
    return r;
  }

  friend ModeIndex operator+(ModeIndex a, const ModeIndex& b) {
    if (a.dim_ != b.dim_) throw DimensionMismatch("mode index dimensions differ");
    for (std::size_t i = 0; i < a.comps_.size(); ++i) a.comps_[i] += b.comps_[i];
    return a;
  }

  friend ModeIndex operator-(const ModeIndex& a, const ModeIndex& b) { return a + (-b); }

  // Lexicographic in the components; unused slots are zero.
  friend auto operator<=>(const ModeIndex&, const ModeIndex&) = default;
  friend bool operator==(const ModeIndex&, const ModeIndex&) = default;

  std::string to_string() const {
    std::string s = "(";
    for (int i = 0; i < dim_; ++i) {
      if (i) s += ",";
      s += std::to_string(comps_[static_cast<std::size_t>(i)]);
    }
    return s + ")";
  }

 private:
  static int checked_dim(int dim) {
    if (dim < 1 || dim > kMaxDim)
      throw std::invalid_argument("torus dimension must be in 1.." + std::to_string(kMaxDim));
    return dim;
  }

  std::array<int, kMaxDim> comps_{};
  int dim_ = 0;
};

/// Real-valued trigonometric polynomial on T^d.
class FourierField {
 public:
  using CoeffMap = std::map<ModeIndex, Complex>;

  FourierField() : FourierField(1) {}

  explicit FourierField(int dim) : dim_(ModeIndex(dim).dim()) {}

  /// Canonicalizes `coeffs`: a mode whose partner -k is missing gets the
  /// conjugate partner added, present pairs are averaged onto exact Hermitian
  /// symmetry, and moduli below `prune` times the largest are dropped.
  FourierField(int dim, CoeffMap coeffs, double prune = kDefaultPrune)
      : dim_(ModeIndex(dim).dim()), coeffs_(std::move(coeffs)) {
    canonicalize(prune);
  }

  static FourierField constant(int dim, double value) {
    return FourierField(dim, {{ModeIndex::zero(dim), Complex(value, 0.0)}});
  }

  /// amplitude * cos(k.x)
  static FourierField cosine(const ModeIndex& k, double amplitude = 1.0) {
    if (k.is_zero()) return constant(k.dim(), amplitude);
    return FourierField(k.dim(), {{k, Complex(0.5 * amplitude, 0.0)}, {-k, Complex(0.5 * amplitude, 0.0)}});
  }

  /// amplitude * sin(k.x)
  static FourierField sine(const ModeIndex& k, double amplitude = 1.0) {
    if (k.is_zero()) return FourierField(k.dim());
    return FourierField(k.dim(), {{k, Complex(0.0, -0.5 * amplitude)}, {-k, Complex(0.0, 0.5 * amplitude)}});
  }

  int dim() const noexcept { return dim_; }
  const CoeffMap& coeffs() const noexcept { return coeffs_; }
  bool empty() const noexcept { return coeffs_.empty(); }
  std::size_t size() const noexcept { return coeffs_.size(); }

  Complex coeff(const ModeIndex& k) const {
    auto it = coeffs_.find(k);
    return it == coeffs_.end() ? Complex{} : it->second;
  }

  /// Largest |k|_inf in the support, 0 for the empty field.
  int max_mode() const noexcept {
    int m = 0;
    for (const auto& [k, c] : coeffs_) m = std::max(m, k.max_abs());
    return m;
  }

  double max_modulus() const noexcept {
    double m = 0.0;
    for (const auto& [k, c] : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  FourierField pruned(double prune) const { return FourierField(dim_, coeffs_, prune); }

  /// Pointwise value at x (length dim).
  double evaluate(std::span<const double> x) const {
    double v = 0.0;
    for (const auto& [k, c] : coeffs_) {
      double phase = 0.0;
      for (int i = 0; i < dim_; ++i) phase += k[i] * x[static_cast<std::size_t>(i)];
      v += (c * std::polar(1.0, phase)).real();
    }
    return v;
  }

  FourierField operator-() const {
    CoeffMap out = coeffs_;
    for (auto& [k, c] : out) c = -c;
    return FourierField(dim_, std::move(out));
  }

  friend FourierField operator+(const FourierField& a, const FourierField& b) {
    return axpy(1.0, b, a);
  }

  friend FourierField operator-(const FourierField& a, const FourierField& b) {
    return axpy(-1.0, b, a);
  }

  friend FourierField operator*(double s, const FourierField& f) {
    if (s == 0.0) return FourierField(f.dim_);
    CoeffMap out = f.coeffs_;
    for (auto& [k, c] : out) c *= s;
    return FourierField(f.dim_, std::move(out));
  }

  friend FourierField operator*(const FourierField& f, double s) { return s * f; }

  /// y + s * x
  friend FourierField axpy(double s, const FourierField& x, const FourierField& y) {
    require_same_dim(x, y);
    CoeffMap out = y.coeffs_;
    for (const auto& [k, c] : x.coeffs_) out[k] += s * c;
    return FourierField(y.dim_, std::move(out));
  }

  friend void require_same_dim(const FourierField& a, const FourierField& b) {
    if (a.dim_ != b.dim_)
      throw DimensionMismatch("fields on T^" + std::to_string(a.dim_) + " and T^" +
                              std::to_string(b.dim_));
  }

 private:
  void canonicalize(double prune) {
    for (const auto& [k, c] : coeffs_)
      if (k.dim() != dim_) throw DimensionMismatch("mode " + k.to_string() + " in a field on T^" + std::to_string(dim_));

    CoeffMap sym;
    for (const auto& [k, c] : coeffs_) {
      if (sym.contains(k)) continue;
      const ModeIndex nk = -k;
      auto partner = coeffs_.find(nk);
      if (k == nk) {
        sym.emplace(k, Complex(c.real(), 0.0));
      } else if (partner == coeffs_.end()) {
        sym.emplace(k, c);
        sym.emplace(nk, std::conj(c));
      } else {
        const Complex avg = 0.5 * (c + std::conj(partner->second));
        sym.emplace(k, avg);
        sym.emplace(nk, std::conj(avg));
      }
    }

    double m = 0.0;
    for (const auto& [k, c] : sym) m = std::max(m, std::abs(c));
    const double floor = prune * m;
    std::erase_if(sym, [&](const auto& kv) { return kv.second == Complex{} || std::abs(kv.second) < floor; });
    coeffs_ = std::move(sym);
  }

  int dim_;
  CoeffMap coeffs_;
};

/// The low-mode control profiles: mu_0 = 1, mu_{2i-1} = cos(e_i.x),
/// mu_{2i} = sin(e_i.x) for i = 1..d.
inline FourierField make_mu(int j, int dim) {
  if (j < 0 || j > 2 * dim) throw std::out_of_range("control profile index " + std::to_string(j) + " outside 0.." + std::to_string(2 * dim));
  if (j == 0) return FourierField::constant(dim, 1.0);
  const ModeIndex e = ModeIndex::unit(dim, (j - 1) / 2);
  return (j % 2 == 1) ? FourierField::cosine(e) : FourierField::sine(e);
}

/// sum_j p_j mu_j
inline FourierField control_profile(std::span<const double> p, int dim) {
  if (p.size() != static_cast<std::size_t>(2 * dim + 1))
    throw DimensionMismatch("control vector needs 2d+1 = " + std::to_string(2 * dim + 1) + " entries");
  FourierField::CoeffMap out;
  out[ModeIndex::zero(dim)] += p[0];
  for (int i = 0; i < dim; ++i) {
    const ModeIndex e = ModeIndex::unit(dim, i);
    const double a = p[static_cast<std::size_t>(2 * i + 1)];
    const double b = p[static_cast<std::size_t>(2 * i + 2)];
    out[e] += Complex(0.5 * a, -0.5 * b);
    out[-e] += Complex(0.5 * a, 0.5 * b);
  }
  return FourierField(dim, std::move(out));
}

/// Inverse of control_profile; throws if f has content outside span{mu_j}.
inline std::vector<double> control_coefficients(const FourierField& f, double tol = 1e-12) {
  const int d = f.dim();
  std::vector<double> p(static_cast<std::size_t>(2 * d + 1), 0.0);
  p[0] = f.coeff(ModeIndex::zero(d)).real();
  for (int i = 0; i < d; ++i) {
    const Complex c = f.coeff(ModeIndex::unit(d, i));
    p[static_cast<std::size_t>(2 * i + 1)] = 2.0 * c.real();
    p[static_cast<std::size_t>(2 * i + 2)] = -2.0 * c.imag();
  }
  double scale = std::max(1.0, f.max_modulus());
  for (const auto& [k, c] : f.coeffs())
    if (k.l1() > 1 && std::abs(c) > tol * scale)
      throw std::invalid_argument("field has mode " + k.to_string() + " outside the low-mode span");
  return p;
}

/// Pointwise product, i.e. the discrete convolution of coefficients.
inline FourierField multiply(const FourierField& f, const FourierField& g) {
  require_same_dim(f, g);
  FourierField::CoeffMap out;
  for (const auto& [m, a] : f.coeffs())
    for (const auto& [n, b] : g.coeffs()) out[m + n] += a * b;
  return FourierField(f.dim(), std::move(out));
}

/// (sum_k (1+|k|^2)^s |c_k|^2)^{1/2} for s in {0,1,2}.
inline double sobolev_norm(const FourierField& f, int s) {
  if (s < 0 || s > 2) throw std::invalid_argument("Sobolev index must be 0, 1 or 2");
  double acc = 0.0;
  for (const auto& [k, c] : f.coeffs()) {
    const double w = std::pow(1.0 + static_cast<double>(k.norm_sq()), s);
    acc += w * std::norm(c);
  }
  return std::sqrt(acc);
}

/// Splits f into its part with |k|_inf <= cap and the remainder.
inline std::pair<FourierField, FourierField> split_at_mode(const FourierField& f, int cap) {
  FourierField::CoeffMap kept, dropped;
  for (const auto& [k, c] : f.coeffs()) (k.max_abs() <= cap ? kept : dropped).emplace(k, c);
  // Both halves are already symmetric and pruned; skip re-pruning against a new maximum.
  return {FourierField(f.dim(), std::move(kept), 0.0), FourierField(f.dim(), std::move(dropped), 0.0)};
}

namespace detail {

inline std::size_t ipow(int base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

// Applies the (rows x cols) matrix `m` along `axis` of a row-major cube whose
// extents are `shape`; that extent becomes `rows`.
inline std::vector<Complex> apply_axis(const std::vector<Complex>& data, std::vector<int>& shape, int axis,
                                       const std::vector<Complex>& m, int rows) {
  const int cols = shape[static_cast<std::size_t>(axis)];
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) inner *= static_cast<std::size_t>(shape[i]);
  std::vector<Complex> out(outer * static_cast<std::size_t>(rows) * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const Complex w = m[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
        if (w == Complex{}) continue;
        const Complex* src = &data[(o * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)) * inner];
        Complex* dst = &out[(o * static_cast<std::size_t>(rows) + static_cast<std::size_t>(r)) * inner];
        for (std::size_t i = 0; i < inner; ++i) dst[i] += w * src[i];
      }
  shape[static_cast<std::size_t>(axis)] = rows;
  return out;
}

inline Complex twiddle(long long k, long long j, int n, double sign) {
  const long long r = ((k * j) % n + n) % n;
  return std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(r) / n);
}

}  // namespace detail

/// Values of f on the uniform grid x = 2*pi*(j_1..j_d)/n, row-major with
/// axis 0 slowest.  Requires n >= 2*max_mode+1.
inline std::vector<double> sample_grid(const FourierField& f, int n) {
  const int d = f.dim();
  const int kmax = f.max_mode();
  if (n < 2 * kmax + 1)
    throw AliasingError("grid of " + std::to_string(n) + " points aliases modes up to " + std::to_string(kmax));
  const int width = 2 * kmax + 1;
  std::vector<int> shape(static_cast<std::size_t>(d), width);
  std::vector<Complex> cube(detail::ipow(width, d));
  for (const auto& [k, c] : f.coeffs()) {
    std::size_t idx = 0;
    for (int i = 0; i < d; ++i) idx = idx * static_cast<std::size_t>(width) + static_cast<std::size_t>(k[i] + kmax);
    cube[idx] = c;
  }
  std::vector<Complex> m(static_cast<std::size_t>(n) * static_cast<std::size_t>(width));
  for (int j = 0; j < n; ++j)
    for (int k = -kmax; k <= kmax; ++k)
      m[static_cast<std::size_t>(j) * static_cast<std::size_t>(width) + static_cast<std::size_t>(k + kmax)] = detail::twiddle(k, j, n, 1.0);
  for (int axis = 0; axis < d; ++axis) cube = detail::apply_axis(cube, shape, axis, m, n);

  const double tol = 1e-10 * std::max(sobolev_norm(f, 0), 1e-300);
  std::vector<double> values(cube.size());
  for (std::size_t i = 0; i < cube.size(); ++i) {
    if (std::abs(cube[i].imag()) > tol + 1e-13 * std::abs(cube[i].real()))
      throw std::logic_error("sampled field has a non-negligible imaginary part");
    values[i] = cube[i].real();
  }
  return values;
}

/// Discrete Fourier coefficients of grid values (layout of sample_grid),
/// truncated to |k|_inf <= max_mode.  Requires n > 2*max_mode.
inline FourierField project_grid(std::span<const double> values, int dim, int max_mode) {
  const auto total = values.size();
  const int n = static_cast<int>(std::lround(std::pow(static_cast<double>(total), 1.0 / dim)));
  if (n < 1 || detail::ipow(n, dim) != total) throw std::invalid_argument("grid is not a uniform n^d array");
  if (max_mode < 0) throw std::invalid_argument("max_mode must be nonnegative");
  if (n <= 2 * max_mode)
    throw AliasingError("grid of " + std::to_string(n) + " points cannot resolve modes up to " + std::to_string(max_mode));
  const int width = 2 * max_mode + 1;
  std::vector<int> shape(static_cast<std::size_t>(dim), n);
  std::vector<Complex> cube(values.begin(), values.end());
  std::vector<Complex> m(static_cast<std::size_t>(width) * static_cast<std::size_t>(n));
  for (int k = -max_mode; k <= max_mode; ++k)
    for (int j = 0; j < n; ++j)
      m[static_cast<std::size_t>(k + max_mode) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)] =
          detail::twiddle(k, j, n, -1.0) / static_cast<double>(n);
  for (int axis = 0; axis < dim; ++axis) cube = detail::apply_axis(cube, shape, axis, m, width);

  FourierField::CoeffMap out;
  std::vector<int> k(static_cast<std::size_t>(dim));
  for (std::size_t idx = 0; idx < cube.size(); ++idx) {
    if (cube[idx] == Complex{}) continue;
    std::size_t rest = idx;
    for (int i = dim - 1; i >= 0; --i) {
      k[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(width)) - max_mode;
      rest /= static_cast<std::size_t>(width);
    }
    out.emplace(ModeIndex(std::span<const int>(k)), cube[idx]);
  }
  return FourierField(dim, std::move(out));
}

}  // namespace torwave
