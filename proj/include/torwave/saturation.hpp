#pragma once

// Saturation levels: H_0 = span{mu_0..mu_2d}, and a level-n element is
// phi_0 - sum_i phi_i^2 with children of lower level.  SatExpression is the
// explicit tree; saturate_mode builds canonical trees for +-cos(kx), +-sin(kx)
// from the doubling and addition identities
//   cos(2kx) = 1 - 2 sin^2(kx)                -cos(2kx) = 1 - 2 cos^2(kx)
//   +-sin(2kx) = 1 - (sin(kx) -+ cos(kx))^2
//   +-cos((k+m)x) = 1 - (cos(kx) -+ cos(mx))^2/2 - (sin(kx) +- sin(mx))^2/2
//   +-sin((k+m)x) = 1 - (sin(kx) -+ cos(mx))^2/2 - (cos(kx) -+ sin(mx))^2/2

#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "torwave/field_io.hpp"
#include "torwave/fourier_field.hpp"

namespace torwave {

enum class TrigKind { Cos, Sin };

class SatExpression {
 public:
  /// sum_j coeffs[j] mu_j, level 0.  coeffs has 2d+1 entries.
  static SatExpression generator(std::vector<double> coeffs) {
    if (coeffs.size() < 3 || coeffs.size() % 2 == 0)
      throw std::invalid_argument("generator needs 2d+1 coefficients");
    auto node = std::make_shared<Node>();
    node->dim = static_cast<int>(coeffs.size() - 1) / 2;
    node->level = 0;
    node->coeffs = std::move(coeffs);
    return SatExpression(std::move(node));
  }

  static SatExpression zero(int dim) {
    return generator(std::vector<double>(static_cast<std::size_t>(2 * dim + 1), 0.0));
  }

  /// base - sum squares[i]^2
  static SatExpression combination(SatExpression base, std::vector<SatExpression> squares) {
    auto node = std::make_shared<Node>();
    node->dim = base.dim();
    int lvl = base.level();
    for (const auto& s : squares) {
      if (s.dim() != node->dim) throw DimensionMismatch("saturation children on different tori");
      lvl = std::max(lvl, s.level());
    }
    node->level = lvl + 1;
    node->children.reserve(squares.size() + 1);
    node->children.push_back(std::move(base));
    for (auto& s : squares) node->children.push_back(std::move(s));
    return SatExpression(std::move(node));
  }

  bool is_generator() const noexcept { return node_->children.empty(); }
  int level() const noexcept { return node_->level; }
  int dim() const noexcept { return node_->dim; }

  const std::vector<double>& coefficients() const {
    if (!is_generator()) throw std::logic_error("coefficients() on a combination");
    return node_->coeffs;
  }

  const SatExpression& base() const {
    if (is_generator()) throw std::logic_error("base() on a generator");
    return node_->children.front();
  }

  std::span<const SatExpression> squares() const {
    if (is_generator()) return {};
    return std::span<const SatExpression>(node_->children).subspan(1);
  }

  /// Tree whose value is a times this one.  For a combination a must be
  /// nonnegative: the base absorbs a, every square child absorbs sqrt(a).
  SatExpression scaled(double a) const {
    if (is_generator()) {
      std::vector<double> c = node_->coeffs;
      for (auto& x : c) x *= a;
      return generator(std::move(c));
    }
    if (a < 0.0) throw std::domain_error("a combination can only be scaled by a nonnegative factor");
    if (a == 0.0) return zero(dim());
    const double r = std::sqrt(a);
    std::vector<SatExpression> sq;
    for (const auto& s : squares()) sq.push_back(s.scaled(r));
    return combination(base().scaled(a), std::move(sq));
  }

 private:
  struct Node {
    int dim = 0;
    int level = 0;
    std::vector<double> coeffs;
    std::vector<SatExpression> children;  // base, then squares
  };

  explicit SatExpression(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  std::shared_ptr<const Node> node_;
};

/// Value of the tree as a trigonometric polynomial.
inline FourierField expand(const SatExpression& e) {
  if (e.is_generator()) return control_profile(e.coefficients(), e.dim());
  FourierField v = expand(e.base());
  for (const auto& s : e.squares()) {
    const FourierField x = expand(s);
    v = v - multiply(x, x);
  }
  return v;
}

/// Tree for a + b; any combination among the operands must already carry a
/// nonnegative overall factor.
inline SatExpression add(const SatExpression& a, const SatExpression& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("saturation trees on different tori");
  if (a.is_generator() && b.is_generator()) {
    std::vector<double> c = a.coefficients();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b.coefficients()[i];
    return SatExpression::generator(std::move(c));
  }
  if (a.is_generator()) return add(b, a);
  std::vector<SatExpression> sq(a.squares().begin(), a.squares().end());
  if (b.is_generator()) return SatExpression::combination(add(a.base(), b), std::move(sq));
  sq.insert(sq.end(), b.squares().begin(), b.squares().end());
  return SatExpression::combination(add(a.base(), b.base()), std::move(sq));
}

namespace detail {

inline SatExpression unit_generator(int dim, int j, double value) {
  std::vector<double> c(static_cast<std::size_t>(2 * dim + 1), 0.0);
  c[static_cast<std::size_t>(j)] = value;
  return SatExpression::generator(std::move(c));
}

}  // namespace detail

/// Canonical tree whose value is sign * kind(k.x).
inline SatExpression saturate_mode(ModeIndex k, TrigKind kind, int sign) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
  const int d = k.dim();
  if (k.is_zero()) {
    if (kind == TrigKind::Sin) throw std::invalid_argument("sin(0.x) vanishes; no tree for it");
    return detail::unit_generator(d, 0, sign);
  }
  int lead = 0;
  while (k[lead] == 0) ++lead;
  if (k[lead] < 0) {
    k = -k;
    if (kind == TrigKind::Sin) sign = -sign;
  }
  const int cos_j = 2 * lead + 1;
  const int sin_j = 2 * lead + 2;
  if (k.l1() == 1) return detail::unit_generator(d, kind == TrigKind::Cos ? cos_j : sin_j, sign);

  const SatExpression one = detail::unit_generator(d, 0, 1.0);
  if (k.l1() == std::abs(k[lead]) && k[lead] % 2 == 0) {
    ModeIndex half = k;
    half[lead] /= 2;
    SatExpression child = [&] {
      if (kind == TrigKind::Cos)
        return saturate_mode(half, sign > 0 ? TrigKind::Sin : TrigKind::Cos, 1).scaled(std::numbers::sqrt2);
      return add(saturate_mode(half, TrigKind::Sin, 1), saturate_mode(half, TrigKind::Cos, -sign));
    }();
    return SatExpression::combination(one, {child});
  }

  // Peel one unit step e_lead off the leading component.
  ModeIndex rest = k;
  rest[lead] -= 1;
  const double r = 1.0 / std::numbers::sqrt2;
  const double s = sign;
  if (kind == TrigKind::Cos) {
    SatExpression a = add(saturate_mode(rest, TrigKind::Cos, 1), detail::unit_generator(d, cos_j, -s));
    SatExpression b = add(saturate_mode(rest, TrigKind::Sin, 1), detail::unit_generator(d, sin_j, s));
    return SatExpression::combination(one, {a.scaled(r), b.scaled(r)});
  }
  SatExpression a = add(saturate_mode(rest, TrigKind::Sin, 1), detail::unit_generator(d, cos_j, -s));
  SatExpression b = add(saturate_mode(rest, TrigKind::Cos, 1), detail::unit_generator(d, sin_j, -s));
  return SatExpression::combination(one, {a.scaled(r), b.scaled(r)});
}

struct SatTerm {
  double weight;  // nonnegative; the sign lives in the tree
  SatExpression expr;

  /// The weight folded into the tree.
  SatExpression folded() const { return expr.scaled(weight); }
};

struct SatDecomposition {
  std::vector<SatTerm> terms;
  FourierField achieved_target;
  double residual_norm = 0.0;

  int max_level() const {
    int m = 0;
    for (const auto& t : terms) m = std::max(m, t.expr.level());
    return m;
  }
};

/// Writes target as sum_k a_k cos(kx) + b_k sin(kx) and emits one weighted
/// canonical tree per nonzero a_k, b_k.  Finite supports leave no residual.
inline SatDecomposition decompose(const FourierField& target, double max_residual = 0.0) {
  const int d = target.dim();
  SatDecomposition out;
  auto emit = [&](const ModeIndex& k, TrigKind kind, double a) {
    if (a == 0.0) return;
    out.terms.push_back({std::abs(a), saturate_mode(k, kind, a > 0 ? 1 : -1)});
  };
  for (const auto& [k, c] : target.coeffs()) {
    if (k.is_zero()) {
      emit(k, TrigKind::Cos, c.real());
      continue;
    }
    int lead = 0;
    while (k[lead] == 0) ++lead;
    if (k[lead] < 0) continue;  // the partner -k carries the pair
    emit(k, TrigKind::Cos, 2.0 * c.real());
    emit(k, TrigKind::Sin, -2.0 * c.imag());
  }
  FourierField achieved(d);
  for (const auto& t : out.terms) achieved = axpy(t.weight, expand(t.expr), achieved);
  out.achieved_target = achieved;
  out.residual_norm = 0.0;
  if (out.residual_norm > max_residual) throw std::runtime_error("decomposition residual above the allowed bound");
  return out;
}

namespace detail {

inline void write_tree(std::ostream& os, const SatExpression& e, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  if (e.is_generator()) {
    os << pad << "(gen";
    for (double c : e.coefficients()) os << ' ' << format_double(c);
    os << ')';
    return;
  }
  os << pad << "(combo\n";
  write_tree(os, e.base(), indent + 2);
  for (const auto& s : e.squares()) {
    os << '\n' << pad << "  (sq\n";
    write_tree(os, s, indent + 4);
    os << ')';
  }
  os << ')';
}

}  // namespace detail

/// Canonical s-expression dump: (gen a_0 .. a_2d) for generators,
/// (combo <base> (sq <child>)...) for combinations.
inline std::string to_sexpr(const SatExpression& e) {
  std::ostringstream os;
  detail::write_tree(os, e, 0);
  os << '\n';
  return os.str();
}

inline std::string to_sexpr(const SatDecomposition& dec) {
  std::ostringstream os;
  os << "(decomposition residual=" << format_double(dec.residual_norm) << " terms=" << dec.terms.size() << '\n';
  for (const auto& t : dec.terms) {
    os << "  (term weight=" << format_double(t.weight) << " level=" << t.expr.level() << '\n';
    detail::write_tree(os, t.expr, 4);
    os << ")\n";
  }
  os << ")\n";
  return os.str();
}

}  // namespace torwave
