#pragma once

#include <cmath>
#include <utility>

#include "torwave/fourier_field.hpp"

namespace torwave {

/// (profile w, velocity dw/dt) in H^1 x L^2.
struct WaveState {
  FourierField profile;
  FourierField velocity;

  WaveState() = default;

  WaveState(FourierField w, FourierField v) : profile(std::move(w)), velocity(std::move(v)) {
    require_same_dim(profile, velocity);
  }

  static WaveState zero(int dim) { return {FourierField(dim), FourierField(dim)}; }

  int dim() const noexcept { return profile.dim(); }
  bool is_zero() const noexcept { return profile.empty() && velocity.empty(); }
};

/// ||w||_{H^1}^2 + ||v||_{L^2}^2, square-rooted.
inline double state_norm(const WaveState& s) {
  return std::hypot(sobolev_norm(s.profile, 1), sobolev_norm(s.velocity, 0));
}

inline double state_error(const WaveState& a, const WaveState& b) {
  require_same_dim(a.profile, b.profile);
  return std::hypot(sobolev_norm(a.profile - b.profile, 1), sobolev_norm(a.velocity - b.velocity, 0));
}

}  // namespace torwave
