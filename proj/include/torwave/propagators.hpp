#pragma once

// Flows of  dW/dt = (A + phi B) W  with  A = (0 I; Laplacian 0),  B = (0 0; I 0).
// Free evolution and kicks are exact; constant controls use Strang splitting
// between the two.

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "torwave/fourier_field.hpp"
#include "torwave/wave_state.hpp"

namespace torwave {

/// Strang splitting; the step count is ceil(t / dt_max).
struct SplittingParams {
  double dt_max = 1e-3;

  void validate() const {
    if (!(dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
  }
};

/// Enforces the mode cap |k|_inf <= cap and accumulates the H^1 x L^2 norm of
/// everything cut away.
class TruncationMeter {
 public:
  explicit TruncationMeter(int cap) : cap_(cap) {
    if (cap < 0) throw std::invalid_argument("mode cap must be nonnegative");
  }

  int cap() const noexcept { return cap_; }
  double residual() const noexcept { return residual_; }

  WaveState clip(WaveState s) {
    if (s.profile.max_mode() <= cap_ && s.velocity.max_mode() <= cap_) return s;
    auto [w, dw] = split_at_mode(s.profile, cap_);
    auto [v, dv] = split_at_mode(s.velocity, cap_);
    residual_ += std::hypot(sobolev_norm(dw, 1), sobolev_norm(dv, 0));
    return {std::move(w), std::move(v)};
  }

 private:
  int cap_;
  double residual_ = 0.0;
};

/// e^{tA} with the mode-wise rotation factors cached by |k|^2.
class FreeFlow {
 public:
  explicit FreeFlow(double t) : t_(t) {}

  WaveState operator()(const WaveState& s) const {
    require_same_dim(s.profile, s.velocity);
    const int d = s.dim();
    FourierField::CoeffMap w, v;
    auto rotate = [&](const ModeIndex& k, Complex w0, Complex v0) {
      const std::int64_t lam = k.norm_sq();
      if (lam == 0) {
        w.emplace(k, w0 + v0 * t_);
        v.emplace(k, v0);
        return;
      }
      const auto& [omega, cs, sn] = factors(lam);
      w.emplace(k, w0 * cs + v0 * (sn / omega));
      v.emplace(k, -omega * sn * w0 + v0 * cs);
    };
    const auto& wp = s.profile.coeffs();
    const auto& vp = s.velocity.coeffs();
    auto iw = wp.begin();
    auto iv = vp.begin();
    while (iw != wp.end() || iv != vp.end()) {
      if (iv == vp.end() || (iw != wp.end() && iw->first < iv->first)) {
        rotate(iw->first, iw->second, Complex{});
        ++iw;
      } else if (iw == wp.end() || iv->first < iw->first) {
        rotate(iv->first, Complex{}, iv->second);
        ++iv;
      } else {
        rotate(iw->first, iw->second, iv->second);
        ++iw;
        ++iv;
      }
    }
    return {FourierField(d, std::move(w)), FourierField(d, std::move(v))};
  }

  double time() const noexcept { return t_; }

 private:
  struct Factors {
    double omega, cs, sn;
  };

  const Factors& factors(std::int64_t lam) const {
    auto it = cache_.find(lam);
    if (it != cache_.end()) return it->second;
    const double omega = std::sqrt(static_cast<double>(lam));
    return cache_.emplace(lam, Factors{omega, std::cos(omega * t_), std::sin(omega * t_)}).first->second;
  }

  double t_;
  mutable std::unordered_map<std::int64_t, Factors> cache_;
};

/// Exact free evolution e^{tA}; t may be negative.
inline WaveState free_evolve(const WaveState& s, double t) { return FreeFlow(t)(s); }

/// e^{c phi B} = I + c phi B: the velocity gains c * phi * w.
inline WaveState kick(const WaveState& s, double c, const FourierField& phi) {
  require_same_dim(s.profile, phi);
  if (c == 0.0 || phi.empty() || s.profile.empty()) return s;
  return {s.profile, axpy(c, multiply(phi, s.profile), s.velocity)};
}

namespace detail {

// n Strang steps  e^{h/2 A} e^{h phi B} e^{h/2 A}  with the inner half steps
// merged.  `on_step(i, boundary_state)` is called after step i (1-based) when
// `sample_every` divides i; the emitted state does not feed back into the chain.
inline WaveState strang_steps(WaveState s, const FourierField& phi, double h, long long n,
                              TruncationMeter* meter, long long sample_every,
                              const std::function<void(long long, const WaveState&)>& on_step) {
  const FreeFlow half(0.5 * h);
  const FreeFlow full(h);
  s = half(s);
  for (long long i = 1; i <= n; ++i) {
    s = kick(s, h, phi);
    if (meter) s = meter->clip(std::move(s));
    if (i == n) {
      s = half(s);
      if (on_step && sample_every > 0) on_step(i, s);
    } else {
      if (on_step && sample_every > 0 && i % sample_every == 0) on_step(i, half(s));
      s = full(s);
    }
  }
  return s;
}

inline long long strang_step_count(double t, const SplittingParams& params) {
  params.validate();
  return std::max(1LL, static_cast<long long>(std::ceil(t / params.dt_max - 1e-12)));
}

}  // namespace detail

/// Approximates e^{t(A + phi B)} with phi = sum_j p_j mu_j.  p = 0 reduces to
/// one exact free step.  Global error is O(h^2), h = t / ceil(t/dt_max).
inline WaveState constant_control_evolve(const WaveState& s, std::span<const double> p, double t,
                                         const SplittingParams& params, TruncationMeter* meter = nullptr) {
  if (!(t > 0.0)) throw std::invalid_argument("constant_control_evolve needs t > 0");
  const FourierField phi = control_profile(p, s.dim());
  if (phi.empty()) return free_evolve(s, t);
  const long long n = detail::strang_step_count(t, params);
  return detail::strang_steps(s, phi, t / static_cast<double>(n), n, meter, 0, {});
}

/// e^{-psi B / sqrt(tau)} e^{tau A} e^{psi B / sqrt(tau)}, every factor exact.
inline WaveState conjugated_step(const WaveState& s, const FourierField& psi, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("conjugated_step needs tau > 0");
  const double c = 1.0 / std::sqrt(tau);
  return kick(free_evolve(kick(s, c, psi), tau), -c, psi);
}

/// Small-tau limit of conjugated_step: (w, v - mu^2 w).
inline WaveState bracket_target(const WaveState& s, const FourierField& mu) {
  require_same_dim(s.profile, mu);
  return {s.profile, s.velocity - multiply(multiply(mu, mu), s.profile)};
}

/// sum_{k != 0} |k|^2 |w_k|^2 + sum_k |v_k|^2
inline double energy(const WaveState& s) {
  double e = 0.0;
  for (const auto& [k, c] : s.profile.coeffs()) e += static_cast<double>(k.norm_sq()) * std::norm(c);
  for (const auto& [k, c] : s.velocity.coeffs()) e += std::norm(c);
  return e;
}

}  // namespace torwave
