#pragma once

// Schedule synthesis.  A velocity shift (w, v) -> (w, v + phi w) is realized
// by decomposing phi into saturation trees and compiling each tree:
//   generator a      one segment of length tau with p = a / tau
//   b - sum s_i^2    realize(b), then for every s_i the conjugation
//                    realize(+s_i/sqrt(g)) ; free g ; realize(-s_i/sqrt(g))
// The transfer planner chains shift, free glide and shift.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "torwave/errors.hpp"
#include "torwave/propagators.hpp"
#include "torwave/saturation.hpp"
#include "torwave/schedule.hpp"

namespace torwave {

/// Lengths used to compile saturation trees.  gamma[l-1] is the free gap of
/// the square kicks of a level-l node.
struct RealizationParams {
  double tau = 1e-3;
  std::vector<double> gamma;
  bool ideal = false;

  /// Top gap s; each level below uses the square of the gap above, and tau is
  /// the square of the innermost gap (tau = s for level-0 trees).
  static RealizationParams from_scale(double s, int max_level, bool ideal = false) {
    RealizationParams r;
    r.ideal = ideal;
    r.gamma.assign(static_cast<std::size_t>(std::max(max_level, 0)), 0.0);
    double g = s;
    for (int l = max_level; l >= 1; --l) {
      r.gamma[static_cast<std::size_t>(l - 1)] = g;
      g = g * g;
    }
    r.tau = max_level >= 1 ? g : s;
    return r;
  }

  RealizationParams scaled(double factor) const {
    RealizationParams r = *this;
    r.tau *= factor;
    for (auto& g : r.gamma) g *= factor;
    return r;
  }

  double gap(int level) const {
    if (gamma.empty()) throw std::logic_error("no square-kick gap configured");
    const auto i = static_cast<std::size_t>(std::clamp(level, 1, static_cast<int>(gamma.size())) - 1);
    return gamma[i];
  }
};

struct SynthOptions {
  StepPolicy policy;
  int mode_cap = 32;
  int grid_n = 64;
  std::uint64_t seed = 0;
  int max_iterations = 40;
  double start_fraction = 0.1;
  std::size_t max_segments = 200000;
  int max_tree_level = 2;
  int max_fit_mode = 12;
  double shares[3] = {0.4, 0.2, 0.4};
  bool ideal_kicks = false;
};

namespace detail {

struct Compiler {
  int dim;
  const RealizationParams& params;
  std::size_t max_segments;

  void emit(ControlSchedule& out, ControlSegment seg) const {
    if (out.segments().size() >= max_segments)
      throw BudgetExhausted("realization needs more than " + std::to_string(max_segments) + " segments");
    out.push(std::move(seg));
  }

  void generator(ControlSchedule& out, const std::vector<double>& a) const {
    if (params.ideal) {
      FourierField phi = control_profile(a, dim);
      if (!phi.empty()) emit(out, ControlSegment::impulse(dim, 1.0, std::move(phi)));
      return;
    }
    ControlSegment seg = ControlSegment::free(dim, params.tau);
    for (std::size_t j = 0; j < a.size(); ++j) seg.p[j] = a[j] / params.tau;
    emit(out, std::move(seg));
  }

  void field(ControlSchedule& out, const FourierField& phi) const {
    if (phi.empty()) return;
    const SatDecomposition dec = decompose(phi);
    std::vector<double> gen(static_cast<std::size_t>(2 * dim + 1), 0.0);
    bool any_gen = false;
    for (const auto& t : dec.terms) {
      const SatExpression e = t.folded();
      if (e.is_generator()) {
        for (std::size_t j = 0; j < gen.size(); ++j) gen[j] += e.coefficients()[j];
        any_gen = true;
      } else {
        tree(out, e);
      }
    }
    if (any_gen) generator(out, gen);
  }

  void tree(ControlSchedule& out, const SatExpression& e) const {
    if (e.is_generator()) {
      generator(out, e.coefficients());
      return;
    }
    tree(out, e.base());
    for (const auto& s : e.squares()) square(out, s, params.gap(e.level()));
  }

  void square(ControlSchedule& out, const SatExpression& s, double gap) const {
    const FourierField v = expand(s);
    if (v.empty()) {
      emit(out, ControlSegment::free(dim, gap));
      return;
    }
    const double c = 1.0 / std::sqrt(gap);
    field(out, c * v);
    emit(out, ControlSegment::free(dim, gap));
    field(out, -c * v);
  }
};

}  // namespace detail

/// One segment of length tau with p = coeffs / tau; zero coefficients give a
/// free segment.
inline ControlSchedule schedule_generator_kick(const std::vector<double>& coeffs, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("generator kick needs tau > 0");
  const int d = static_cast<int>(coeffs.size() - 1) / 2;
  ControlSchedule out(d);
  RealizationParams params;
  params.tau = tau;
  detail::Compiler{d, params, static_cast<std::size_t>(-1)}.generator(out, coeffs);
  return out;
}

/// Approximates e^{-s^2 B} by conjugating a free gap of length gamma with the
/// realized kicks of +-s/sqrt(gamma).  Nested trees use `params`.
inline ControlSchedule schedule_square_kick(const SatExpression& s, double gamma, double budget,
                                            RealizationParams params, std::size_t max_segments = 200000) {
  if (!(gamma > 0.0)) throw std::invalid_argument("square kick needs gamma > 0");
  if (!(gamma < budget / 3.0)) throw BudgetExhausted("square-kick gap does not fit in a third of the budget");
  if (params.gamma.empty()) params.gamma.assign(1, gamma);
  ControlSchedule out(s.dim());
  detail::Compiler{s.dim(), params, max_segments}.square(out, s, gamma);
  if (out.total_time() > budget) throw BudgetExhausted("square-kick realization exceeds its budget");
  return out;
}

/// Compiles the velocity shift v -> v + phi w for fixed parameters.
inline ControlSchedule realize_velocity_shift(const FourierField& phi, const RealizationParams& params,
                                              std::size_t max_segments = 200000) {
  ControlSchedule out(phi.dim());
  detail::Compiler{phi.dim(), params, max_segments}.field(out, phi);
  return out;
}

/// Highest saturation level of the trees realizing phi.
inline int realization_level(const FourierField& phi) { return phi.empty() ? 0 : decompose(phi).max_level(); }

struct VelocityShift {
  ControlSchedule schedule;
  RealizationParams params;
  double error = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// Halves the top gap from start_fraction * budget until the simulated state
/// is within eps of (w, v + phi w).  Keeps the best attempt otherwise.
inline VelocityShift schedule_velocity_shift(const WaveState& state, const FourierField& phi, double eps,
                                             double budget, const SynthOptions& opt = {}) {
  require_same_dim(state.profile, phi);
  if (!(eps > 0.0) || !(budget > 0.0)) throw std::invalid_argument("velocity shift needs eps > 0 and budget > 0");
  VelocityShift best{ControlSchedule(phi.dim()), {}, 0.0, true, 0};
  if (phi.empty()) return best;
  const WaveState target = kick(state, 1.0, phi);
  const int level = realization_level(phi);
  best.error = std::numeric_limits<double>::infinity();
  best.converged = false;
  double s = opt.start_fraction * budget;
  for (int it = 1; it <= opt.max_iterations; ++it, s *= 0.5) {
    const RealizationParams params = RealizationParams::from_scale(s, level, opt.ideal_kicks);
    if (!(params.tau > 0.0)) break;
    ControlSchedule sched(phi.dim());
    try {
      sched = realize_velocity_shift(phi, params, opt.max_segments);
    } catch (const BudgetExhausted&) {
      break;
    }
    if (sched.total_time() > budget) continue;
    TruncationMeter meter(opt.mode_cap);
    const double err = state_error(apply_schedule(state, sched, opt.policy, &meter), target);
    best.iterations = it;
    if (err < best.error) {
      best.schedule = std::move(sched);
      best.params = params;
      best.error = err;
    }
    if (err < eps) {
      best.converged = true;
      break;
    }
  }
  if (!std::isfinite(best.error)) throw BudgetExhausted("no velocity-shift realization fits the budget");
  return best;
}

struct MomentVelocity {
  double tau;
  FourierField f;
  double margin;
};

/// Initial velocity f with free_evolve((w0, f), tau).profile == w1.
inline FourierField moment_velocity_at(const FourierField& w0, const FourierField& w1, double tau) {
  require_same_dim(w0, w1);
  if (!(tau > 0.0)) throw std::invalid_argument("glide time must be positive");
  const FourierField diff_support = w0 + w1;
  FourierField::CoeffMap f;
  auto add = [&](const ModeIndex& k) {
    if (f.contains(k)) return;
    const Complex a = w0.coeff(k), b = w1.coeff(k);
    if (k.is_zero()) {
      f.emplace(k, (b - a) / tau);
      return;
    }
    const double omega = std::sqrt(static_cast<double>(k.norm_sq()));
    f.emplace(k, omega * (b - a * std::cos(omega * tau)) / std::sin(omega * tau));
  };
  for (const auto& [k, c] : w0.coeffs()) add(k);
  for (const auto& [k, c] : w1.coeffs()) add(k);
  return FourierField(w0.dim(), std::move(f));
}

namespace detail {

inline std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  return idx;
}

}  // namespace detail

/// Scans tau over 1000 points of [T/2, T) in seeded order and takes the first
/// one with |sin(|k| tau)| >= margin on the joint support; the margin starts
/// at 0.1 and halves down to 1e-3.
inline MomentVelocity moment_velocity(const FourierField& w0, const FourierField& w1, double T,
                                      std::uint64_t seed = 0) {
  require_same_dim(w0, w1);
  if (!(T > 0.0)) throw std::invalid_argument("glide budget must be positive");
  std::vector<double> omegas;
  for (const auto* f : {&w0, &w1})
    for (const auto& [k, c] : f->coeffs())
      if (!k.is_zero()) omegas.push_back(std::sqrt(static_cast<double>(k.norm_sq())));
  std::sort(omegas.begin(), omegas.end());
  omegas.erase(std::unique(omegas.begin(), omegas.end()), omegas.end());

  constexpr int points = 1000;
  const auto order = detail::shuffled_indices(points, seed);
  for (double margin = 0.1; margin >= 1e-3 * (1 - 1e-12); margin *= 0.5) {
    for (int i : order) {
      const double tau = 0.5 * T + 0.5 * T * i / points;
      bool ok = tau > 0.0;
      for (double om : omegas)
        if (std::abs(std::sin(om * tau)) < margin) {
          ok = false;
          break;
        }
      if (ok) return {tau, moment_velocity_at(w0, w1, tau), margin};
    }
  }
  throw NoAdmissibleTime("every glide time in [T/2, T) is within 1e-3 of a resonance");
}

struct Multiplier {
  FourierField phi;
  double quality;  // ||(v0 + w0 phi) - f||_{L2}
  std::string method;
};

inline double multiplier_quality(const FourierField& w0, const FourierField& v0, const FourierField& f,
                                 const FourierField& phi) {
  return sobolev_norm(v0 + multiply(w0, phi) - f, 0);
}

/// Grid realization of (f - v0)/w0: masked where |w0| < cut, projected onto
/// |k|_inf <= max_mode.
inline Multiplier phi_epsilon(const FourierField& w0, const FourierField& v0, const FourierField& f, double cut,
                              int grid_n, int max_mode) {
  require_same_dim(w0, v0);
  require_same_dim(w0, f);
  const int d = w0.dim();
  const FourierField rhs = f - v0;
  if (rhs.empty()) return {FourierField(d), 0.0, "grid"};
  const auto wv = sample_grid(w0, grid_n);
  const auto rv = sample_grid(rhs, grid_n);
  std::vector<double> q(wv.size(), 0.0);
  bool any = false;
  for (std::size_t i = 0; i < wv.size(); ++i) {
    if (std::abs(wv[i]) < cut) continue;
    q[i] = rv[i] / wv[i];
    any = true;
  }
  if (!any) throw std::domain_error("the profile is below the cut on the whole grid");
  FourierField phi = project_grid(q, d, max_mode);
  return {phi, multiplier_quality(w0, v0, f, phi), "grid"};
}

/// Modes k (first nonzero component positive, plus 0) with |k|_inf <= max_mode
/// whose canonical trees stay at or below max_level.
inline std::vector<ModeIndex> fit_modes(int dim, int max_mode, int max_level) {
  std::vector<ModeIndex> out;
  ModeIndex k(dim);
  for (int i = 0; i < dim; ++i) k[i] = -max_mode;
  while (true) {
    int lead = 0;
    while (lead < dim && k[lead] == 0) ++lead;
    if (lead == dim || k[lead] > 0)
      if (saturate_mode(k, TrigKind::Cos, 1).level() <= max_level) out.push_back(k);
    int i = dim - 1;
    while (i >= 0 && k[i] == max_mode) k[i--] = -max_mode;
    if (i < 0) break;
    ++k[i];
  }
  return out;
}

/// Least-squares multiplier: minimizes ||w0 phi - (f - v0)||_{L2} over real
/// phi spanned by 1, cos(kx), sin(kx) for k in fit_modes.
inline Multiplier fit_velocity_multiplier(const FourierField& w0, const FourierField& v0, const FourierField& f,
                                          int max_mode, int max_level) {
  require_same_dim(w0, v0);
  require_same_dim(w0, f);
  const int d = w0.dim();
  const FourierField rhs = f - v0;
  if (rhs.empty()) return {FourierField(d), 0.0, "least-squares"};
  if (w0.empty()) throw std::domain_error("cannot divide by a zero profile");

  std::vector<FourierField> basis;
  for (const auto& k : fit_modes(d, std::max(max_mode, 0), max_level)) {
    if (k.is_zero()) {
      basis.push_back(FourierField::constant(d, 1.0));
      continue;
    }
    basis.push_back(FourierField::cosine(k));
    basis.push_back(FourierField::sine(k));
  }
  std::vector<FourierField> cols;
  cols.reserve(basis.size());
  std::map<ModeIndex, int> rows;
  auto note_rows = [&](const FourierField& g) {
    for (const auto& [k, c] : g.coeffs()) {
      int lead = 0;
      while (lead < d && k[lead] == 0) ++lead;
      if (lead == d || k[lead] > 0) rows.emplace(k, 0);
    }
  };
  for (const auto& b : basis) {
    cols.push_back(multiply(w0, b));
    note_rows(cols.back());
  }
  note_rows(rhs);
  int r = 0;
  for (auto& [k, idx] : rows) idx = r, r += k.is_zero() ? 1 : 2;

  auto fill = [&](const FourierField& g, auto&& column) {
    for (const auto& [k, c] : g.coeffs()) {
      auto it = rows.find(k);
      if (it == rows.end()) continue;
      if (k.is_zero()) {
        column(it->second) = c.real();
      } else {
        column(it->second) = std::numbers::sqrt2 * c.real();
        column(it->second + 1) = std::numbers::sqrt2 * c.imag();
      }
    }
  };
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(r, static_cast<Eigen::Index>(cols.size()));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(r);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto column = A.col(static_cast<Eigen::Index>(j));
    fill(cols[j], [&](int i) -> double& { return column(i); });
  }
  fill(rhs, [&](int i) -> double& { return b(i); });

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  cod.setThreshold(1e-10);
  const Eigen::VectorXd x = cod.solve(b);
  FourierField phi(d);
  for (std::size_t j = 0; j < basis.size(); ++j) phi = axpy(x(static_cast<Eigen::Index>(j)), basis[j], phi);
  return {phi, multiplier_quality(w0, v0, f, phi), "least-squares"};
}

struct PlanPhase {
  std::string label;  // velocity_shift_1, free_glide, velocity_shift_2, padding
  ControlSchedule schedule;
  std::optional<FourierField> multiplier;
  RealizationParams params;
  double error = 0.0;
  bool converged = true;
};

struct TransferPlan {
  std::vector<PlanPhase> phases;
  double predicted_error = 0.0;
  bool converged = true;
  std::vector<std::pair<std::string, double>> parameters;
  WaveState predicted_final;

  ControlSchedule schedule(int dim) const {
    ControlSchedule out(dim);
    for (const auto& p : phases) out.append(p.schedule);
    return out;
  }

  double total_time() const {
    double t = 0.0;
    for (const auto& p : phases) t += p.schedule.total_time();
    return t;
  }

  void record(std::string key, double value) { parameters.emplace_back(std::move(key), value); }
};

namespace detail {

inline bool is_rest_state(const WaveState& s) {
  if (!s.velocity.empty()) return false;
  for (const auto& [k, c] : s.profile.coeffs())
    if (!k.is_zero()) return false;
  return true;
}

inline WaveState truncated(const WaveState& s, int cap) {
  return {split_at_mode(s.profile, cap).first, split_at_mode(s.velocity, cap).first};
}

/// Largest |k|_inf among coefficients above rel * max modulus.
inline int significant_degree(const FourierField& f, double rel = 1e-3) {
  const double floor = rel * f.max_modulus();
  int deg = 0;
  for (const auto& [k, c] : f.coeffs())
    if (std::abs(c) >= floor) deg = std::max(deg, k.max_abs());
  return deg;
}

inline Multiplier choose_multiplier(const FourierField& w0, const FourierField& v0, const FourierField& f,
                                    const SynthOptions& opt, TransferPlan& plan, const std::string& tag) {
  const int max_mode = std::max(0, opt.mode_cap - significant_degree(w0));
  const int n = std::max(opt.grid_n, 2 * std::max({w0.max_mode(), v0.max_mode(), f.max_mode(), max_mode}) + 2);
  double peak = 0.0;
  for (double x : sample_grid(w0, n)) peak = std::max(peak, std::abs(x));
  const double cut = 0.05 * peak;
  plan.record(tag + ".cut", cut);
  plan.record(tag + ".max_mode", max_mode);
  plan.record(tag + ".grid_n", n);
  Multiplier best = phi_epsilon(w0, v0, f, cut, n, max_mode);
  const Multiplier ls =
      fit_velocity_multiplier(w0, v0, f, std::min(max_mode, opt.max_fit_mode), opt.max_tree_level);
  plan.record(tag + ".grid_quality", best.quality);
  plan.record(tag + ".lsq_quality", ls.quality);
  if (ls.quality < best.quality || realization_level(best.phi) > opt.max_tree_level) best = ls;
  return best;
}

struct Leg {
  const SynthOptions& opt;
  double eps;

  WaveState run(const WaveState& s, const ControlSchedule& sched) const {
    TruncationMeter meter(opt.mode_cap);
    return apply_schedule(s, sched, opt.policy, &meter);
  }

  void shift(TransferPlan& plan, WaveState& state, const FourierField& v_target, const std::string& label,
             double share, double budget) const {
    const Multiplier m = choose_multiplier(state.profile, state.velocity, v_target, opt, plan, label);
    plan.record(label + ".multiplier_quality", m.quality);
    PlanPhase ph{label, ControlSchedule(state.dim()), m.phi, {}, 0.0, true};
    if (!m.phi.empty()) {
      VelocityShift vs = schedule_velocity_shift(state, m.phi, share * eps, budget, opt);
      ph.schedule = std::move(vs.schedule);
      ph.params = vs.params;
      ph.error = vs.error;
      ph.converged = vs.converged;
      plan.record(label + ".iterations", vs.iterations);
      plan.record(label + ".tau", vs.params.tau);
      for (std::size_t l = 0; l < vs.params.gamma.size(); ++l)
        plan.record(label + ".gamma" + std::to_string(l + 1), vs.params.gamma[l]);
      plan.record(label + ".error", vs.error);
    }
    state = run(state, ph.schedule);
    plan.phases.push_back(std::move(ph));
  }

  void glide(TransferPlan& plan, WaveState& state, double t, const std::string& tag) const {
    PlanPhase ph{"free_glide", ControlSchedule(state.dim()), std::nullopt, {}, 0.0, true};
    ph.schedule.push_free(t);
    plan.record(tag, t);
    state = free_evolve(state, t);
    plan.phases.push_back(std::move(ph));
  }

  /// initial -> final within budget T; the final velocity shift starts from
  /// the simulated state after the glide.
  WaveState plan(TransferPlan& plan, WaveState state, const WaveState& final, double T) const {
    double remaining = T;
    if (state.profile.empty()) {
      glide(plan, state, T / 10.0, "pre_glide");
      remaining -= T / 10.0;
    }
    const double glide_budget = T / 3.0;
    const MomentVelocity mv = moment_velocity(state.profile, final.profile, glide_budget, opt.seed);
    plan.record("glide_tau", mv.tau);
    plan.record("glide_margin", mv.margin);
    const double shift_budget = 0.5 * (remaining - mv.tau);
    shift(plan, state, mv.f, "velocity_shift_1", opt.shares[0], shift_budget);
    PlanPhase g{"free_glide", ControlSchedule(state.dim()), std::nullopt, {}, 0.0, true};
    g.schedule.push_free(mv.tau);
    state = free_evolve(state, mv.tau);
    plan.phases.push_back(std::move(g));
    plan.record("glide_profile_error", sobolev_norm(state.profile - final.profile, 1));
    shift(plan, state, final.velocity, "velocity_shift_2", opt.shares[2], shift_budget);
    return state;
  }
};

}  // namespace detail

/// Steers initial to final.  Without exact_time the plan is
/// [shift] [glide] [shift] (plus a leading glide when the profile vanishes);
/// with exact_time it parks at (1, 0), waits and leaves so that the total
/// time is T.
inline TransferPlan plan_transfer(const WaveState& initial, const WaveState& final, double eps, double T,
                                  bool exact_time, const SynthOptions& opt = {}) {
  require_same_dim(initial.profile, final.profile);
  if (initial.is_zero()) throw std::invalid_argument("(0, 0) is an equilibrium and cannot be steered");
  if (!(eps > 0.0) || !(T > 0.0)) throw std::invalid_argument("eps and T must be positive");
  const int d = initial.dim();
  TransferPlan plan;
  plan.record("eps", eps);
  plan.record("T", T);
  plan.record("mode_cap", opt.mode_cap);
  plan.record("seed", static_cast<double>(opt.seed));

  WaveState goal = detail::truncated(final, opt.mode_cap);
  plan.record("final_truncation", state_error(goal, final));
  if (goal.is_zero()) {
    const double eps_prime = 0.1 * eps;
    goal = {FourierField::constant(d, eps_prime), FourierField(d)};
    plan.record("eps_prime", eps_prime);
  }
  const detail::Leg leg{opt, eps};

  auto finish = [&](WaveState reached) {
    plan.predicted_final = reached;
    plan.predicted_error = state_error(reached, final);
    plan.converged = plan.predicted_error < eps;
    return plan;
  };

  if (state_error(initial, goal) == 0.0) {
    if (!exact_time) return finish(initial);
    if (detail::is_rest_state(initial)) {
      PlanPhase pad{"padding", ControlSchedule(d), std::nullopt, {}, 0.0, true};
      pad.schedule.push_free(T);
      plan.phases.push_back(std::move(pad));
      plan.record("padding", T);
      return finish(free_evolve(initial, T));
    }
  }
  if (!exact_time) return finish(leg.plan(plan, initial, goal, T));

  const WaveState rest{FourierField::constant(d, 1.0), FourierField(d)};
  const WaveState parked = detail::is_rest_state(initial) && state_error(initial, rest) == 0.0
                               ? initial
                               : leg.plan(plan, initial, rest, 0.5 * T);
  const double t_first = plan.total_time();
  const std::size_t first_phases = plan.phases.size();
  const std::size_t first_params = plan.parameters.size();
  double t_second = 0.0;
  WaveState reached = parked;
  for (int attempt = 0; attempt < 8; ++attempt) {
    plan.phases.resize(first_phases);
    plan.parameters.resize(first_params);
    const double pad = T - t_first - t_second;
    if (pad < 0.0) throw BudgetExhausted("legs through (1, 0) exceed T");
    PlanPhase ph{"padding", ControlSchedule(d), std::nullopt, {}, 0.0, true};
    ph.schedule.push_free(pad);
    plan.phases.push_back(std::move(ph));
    plan.record("padding", pad);
    const WaveState waited = pad > 0.0 ? free_evolve(parked, pad) : parked;
    TransferPlan second;
    reached = leg.plan(second, waited, goal, 0.5 * T);
    for (auto& p : second.phases) plan.phases.push_back(std::move(p));
    for (auto& [k, v] : second.parameters) plan.record("from_rest." + k, v);
    const double t_new = plan.total_time() - t_first - pad;
    if (t_new == t_second) break;
    t_second = t_new;
  }
  return finish(reached);
}

/// Recompiles every velocity shift of `plan` with its parameters scaled by
/// `factor` and simulates the result from `initial`.
inline TransferPlan refine_plan(const TransferPlan& plan, const WaveState& initial, const WaveState& final,
                                double factor, const SynthOptions& opt = {}) {
  TransferPlan out = plan;
  for (auto& ph : out.phases) {
    if (!ph.multiplier || ph.multiplier->empty()) continue;
    ph.params = ph.params.scaled(factor);
    ph.schedule = realize_velocity_shift(*ph.multiplier, ph.params, opt.max_segments);
  }
  TruncationMeter meter(opt.mode_cap);
  out.predicted_final = apply_schedule(initial, out.schedule(initial.dim()), opt.policy, &meter);
  out.predicted_error = state_error(out.predicted_final, final);
  out.converged = out.predicted_error < plan.predicted_error || plan.converged;
  return out;
}

}  // namespace torwave
