#pragma once

// Schedule execution with traces, limit studies and run configuration.
//
// Config files are flat "key = value" lines ('#' comments).  Keys:
//   d, N_max, dt_max, min_steps, prune, grid_n, seed, truncation_fraction,
//   dt_sample, share_1, share_2, share_3, max_tree_level, max_iterations
//
// Trace CSV header:
//   t,error,energy,truncation_residual,top_profile,top_velocity
// top_* is the largest coefficient modulus on the shell |k|_inf = N_max;
// error is empty when no target was given.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "torwave/errors.hpp"
#include "torwave/field_io.hpp"
#include "torwave/propagators.hpp"
#include "torwave/schedule.hpp"
#include "torwave/synthesizer.hpp"

namespace torwave {

struct SimConfig {
  int d = 1;
  int N_max = 32;
  double dt_max = 1e-3;
  long long min_steps = 64;
  double prune = kDefaultPrune;
  int grid_n = 64;
  std::uint64_t seed = 0;
  double truncation_fraction = 1e-3;  // <= 0 disables the abort
  double dt_sample = 0.0;             // 0: total_time / 200
  double shares[3] = {0.4, 0.2, 0.4};
  int max_tree_level = 2;
  int max_iterations = 40;

  void validate() const {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("d must be in 1.." + std::to_string(kMaxDim));
    if (N_max < 2) throw std::invalid_argument("N_max must be at least 2");
    if (!(dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
    if (prune < 0.0) throw std::invalid_argument("prune must be nonnegative");
    if (grid_n < 1) throw std::invalid_argument("grid_n must be positive");
    if (dt_sample < 0.0) throw std::invalid_argument("dt_sample must be nonnegative");
  }

  StepPolicy policy() const { return {dt_max, min_steps}; }

  SynthOptions synth_options(bool ideal_kicks = false) const {
    SynthOptions o;
    o.policy = policy();
    o.mode_cap = N_max;
    o.grid_n = grid_n;
    o.seed = seed;
    o.max_iterations = max_iterations;
    o.max_tree_level = max_tree_level;
    for (int i = 0; i < 3; ++i) o.shares[i] = shares[i];
    o.ideal_kicks = ideal_kicks;
    return o;
  }
};

inline SimConfig parse_config(std::istream& in) {
  SimConfig cfg;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    const auto eq = line.find('=');
    if (detail::split_ws(line).empty()) continue;
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key_tok = detail::split_ws(line.substr(0, eq));
    const auto val_tok = detail::split_ws(line.substr(eq + 1));
    if (key_tok.size() != 1 || val_tok.size() != 1) throw ParseError(line_no, "expected key = value");
    const std::string key(key_tok[0]);
    const std::string_view val = val_tok[0];
    auto real = [&] {
      double x = 0.0;
      if (!parse_double(val, x)) throw ParseError(line_no, "bad number '" + std::string(val) + "' for " + key);
      return x;
    };
    auto integer = [&] {
      int x = 0;
      if (!parse_int(val, x)) throw ParseError(line_no, "bad integer '" + std::string(val) + "' for " + key);
      return x;
    };
    if (key == "d") cfg.d = integer();
    else if (key == "N_max") cfg.N_max = integer();
    else if (key == "dt_max") cfg.dt_max = real();
    else if (key == "min_steps") cfg.min_steps = integer();
    else if (key == "prune") cfg.prune = real();
    else if (key == "grid_n") cfg.grid_n = integer();
    else if (key == "seed") {
      std::uint64_t x = 0;
      auto res = std::from_chars(val.data(), val.data() + val.size(), x);
      if (res.ec != std::errc{} || res.ptr != val.data() + val.size())
        throw ParseError(line_no, "bad seed '" + std::string(val) + "'");
      cfg.seed = x;
    }
    else if (key == "truncation_fraction") cfg.truncation_fraction = real();
    else if (key == "dt_sample") cfg.dt_sample = real();
    else if (key == "share_1") cfg.shares[0] = real();
    else if (key == "share_2") cfg.shares[1] = real();
    else if (key == "share_3") cfg.shares[2] = real();
    else if (key == "max_tree_level") cfg.max_tree_level = integer();
    else if (key == "max_iterations") cfg.max_iterations = integer();
    else throw ParseError(line_no, "unknown key '" + key + "'");
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
  return cfg;
}

inline SimConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return parse_config(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + (e.line() > 0 ? ":" + std::to_string(e.line()) : "") + ": " + e.message());
  }
}

inline void write_config(std::ostream& os, const SimConfig& c) {
  os << "d = " << c.d << "\nN_max = " << c.N_max << "\ndt_max = " << format_double(c.dt_max)
     << "\nmin_steps = " << c.min_steps << "\nprune = " << format_double(c.prune) << "\ngrid_n = " << c.grid_n
     << "\nseed = " << c.seed << "\ntruncation_fraction = " << format_double(c.truncation_fraction)
     << "\ndt_sample = " << format_double(c.dt_sample) << "\nshare_1 = " << format_double(c.shares[0])
     << "\nshare_2 = " << format_double(c.shares[1]) << "\nshare_3 = " << format_double(c.shares[2])
     << "\nmax_tree_level = " << c.max_tree_level << "\nmax_iterations = " << c.max_iterations << '\n';
}

struct TraceRow {
  double t;
  std::optional<double> error;
  double energy;
  double truncation_residual;
  double top_profile;
  double top_velocity;
};

struct Trace {
  std::vector<TraceRow> rows;

  /// Appends a row; a row at the same time as the last one replaces it.
  void add(TraceRow r) {
    if (!rows.empty() && r.t <= rows.back().t) {
      rows.back() = r;
      return;
    }
    rows.push_back(r);
  }
};

inline void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << "t,error,energy,truncation_residual,top_profile,top_velocity\n";
  for (const auto& r : trace.rows) {
    os << format_double(r.t) << ',' << (r.error ? format_double(*r.error) : std::string()) << ','
       << format_double(r.energy) << ',' << format_double(r.truncation_residual) << ','
       << format_double(r.top_profile) << ',' << format_double(r.top_velocity) << '\n';
  }
}

struct RunResult {
  WaveState final;
  Trace trace;
  double truncation_residual = 0.0;
};

namespace detail {

inline double top_shell(const FourierField& f, int cap) {
  double m = 0.0;
  for (const auto& [k, c] : f.coeffs())
    if (k.max_abs() == cap) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace detail

/// Folds the schedule over `initial`, sampling at every segment boundary and
/// every dt_sample.  Throws TruncationError when the mass cut at |k|_inf >
/// N_max exceeds truncation_fraction of the state norm.
inline RunResult run_schedule(const WaveState& initial, const ControlSchedule& sched,
                              const std::optional<WaveState>& target, const SimConfig& cfg) {
  cfg.validate();
  require_same_dim(initial.profile, FourierField(sched.dim()));
  if (target) require_same_dim(initial.profile, target->profile);
  TruncationMeter meter(cfg.N_max);
  const StepPolicy policy = cfg.policy();
  const double total = sched.total_time();
  const double dt_sample = cfg.dt_sample > 0.0 ? cfg.dt_sample : total / 200.0;
  const double norm0 = state_norm(initial);

  RunResult out;
  auto row = [&](double t, const WaveState& s) {
    out.trace.add({t, target ? std::optional<double>(state_error(s, *target)) : std::nullopt, energy(s),
                   meter.residual(), detail::top_shell(s.profile, cfg.N_max),
                   detail::top_shell(s.velocity, cfg.N_max)});
  };
  auto check = [&](double t, const WaveState& s) {
    if (cfg.truncation_fraction <= 0.0) return;
    const double allowed = cfg.truncation_fraction * std::max(norm0, state_norm(s));
    if (meter.residual() > allowed) {
      std::ostringstream msg;
      msg << "truncation residual " << format_double(meter.residual()) << " exceeds "
          << format_double(allowed) << " at t=" << format_double(t) << " (N_max=" << cfg.N_max << ")";
      throw TruncationError(msg.str());
    }
  };

  WaveState s = meter.clip(initial);
  double t = 0.0;
  row(t, s);
  for (const auto& seg : sched.segments()) {
    const double t0 = t;
    if (seg.ideal_kick) {
      s = meter.clip(kick(s, seg.ideal_kick->c, seg.ideal_kick->phi));
    } else if (seg.duration > 0.0 && seg.is_free()) {
      if (dt_sample > 0.0)
        for (double tau = dt_sample; tau < seg.duration * (1.0 - 1e-9); tau += dt_sample) row(t0 + tau, free_evolve(s, tau));
      s = free_evolve(s, seg.duration);
    } else if (seg.duration > 0.0) {
      const SplittingParams sp = policy.for_segment(seg.duration);
      const long long n = detail::strang_step_count(seg.duration, sp);
      const double h = seg.duration / static_cast<double>(n);
      const long long every = dt_sample > 0.0 ? std::max(1LL, std::llround(dt_sample / h)) : 0;
      s = detail::strang_steps(s, control_profile(seg.p, s.dim()), h, n, &meter, every < n ? every : 0,
                               [&](long long i, const WaveState& x) {
                                 if (n - i >= every) row(t0 + h * static_cast<double>(i), x);
                               });
    }
    t = t0 + seg.duration;
    if (cfg.prune != kDefaultPrune) s = {s.profile.pruned(cfg.prune), s.velocity.pruned(cfg.prune)};
    row(t, s);
    check(t, s);
  }
  out.final = s;
  out.truncation_residual = meter.residual();
  return out;
}

enum class LimitKind { Limit1, Limit2 };

struct LimitStudy {
  std::vector<std::pair<double, double>> rows;  // (tau, error)
  double order = 0.0;                           // least-squares slope of log error vs log tau
};

/// limit1: e^{tau A + xi B} realized with p = xi/tau over time tau, against
/// the kick (w, v + xi w).  limit2: conjugated_step against bracket_target.
inline LimitStudy limit_study(LimitKind kind, const FourierField& field, const WaveState& initial,
                              const std::vector<double>& taus, const StepPolicy& policy = {}) {
  require_same_dim(initial.profile, field);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) throw std::invalid_argument("limit study needs positive tau");
    if (i > 0 && !(taus[i] < taus[i - 1])) throw std::invalid_argument("limit study needs decreasing tau");
  }
  LimitStudy out;
  const WaveState target = kind == LimitKind::Limit1 ? kick(initial, 1.0, field) : bracket_target(initial, field);
  const std::vector<double> xi = kind == LimitKind::Limit1 ? control_coefficients(field) : std::vector<double>{};
  for (double tau : taus) {
    WaveState s;
    if (kind == LimitKind::Limit1) {
      std::vector<double> p = xi;
      for (auto& x : p) x /= tau;
      s = constant_control_evolve(initial, p, tau, policy.for_segment(tau));
    } else {
      s = conjugated_step(initial, field, tau);
    }
    out.rows.emplace_back(tau, state_error(s, target));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& [tau, err] : out.rows) {
    if (!(err > 0.0)) continue;
    const double x = std::log(tau), y = std::log(err);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
  }
  if (n >= 2) out.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

}  // namespace torwave
