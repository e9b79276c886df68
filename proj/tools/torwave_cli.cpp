// torwave command line: simulate, synthesize, saturate, verify-limits, moment.
//
// Exit status: 0 success, 2 eps not met (report still written), 1 bad input.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "torwave/field_io.hpp"
#include "torwave/harness.hpp"
#include "torwave/saturation.hpp"
#include "torwave/schedule.hpp"
#include "torwave/synthesizer.hpp"

namespace fs = std::filesystem;
using namespace torwave;

namespace {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<int> file_dim(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      if (auto d = detail::dim_directive(std::string_view(line).substr(hash))) return d;
      line = line.substr(0, hash);
    }
    const auto tok = detail::split_ws(line);
    if (tok.size() >= 3) return static_cast<int>(tok.size()) - 2;
  }
  return std::nullopt;
}

FourierField load_field(const std::string& path, std::optional<int> dim) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open");
  try {
    return read_field(in, dim);
  } catch (const ParseError& e) {
    throw InputError(path + (e.line() > 0 ? ":" + std::to_string(e.line()) : "") + ": " + e.message());
  }
}

/// "profile.field,velocity.field"; either side may be empty (zero field); a
/// single path is a profile at rest.
WaveState load_state(const std::string& spec, std::optional<int> dim) {
  const auto comma = spec.find(',');
  const std::string wp = spec.substr(0, comma);
  const std::string vp = comma == std::string::npos ? std::string() : spec.substr(comma + 1);
  if (!dim) {
    for (const auto& p : {wp, vp})
      if (!p.empty() && !dim) dim = file_dim(p);
    if (!dim) dim = 1;
  }
  FourierField w = wp.empty() ? FourierField(*dim) : load_field(wp, dim);
  FourierField v = vp.empty() ? FourierField(*dim) : load_field(vp, dim);
  return {std::move(w), std::move(v)};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_state(const fs::path& dir, const std::string& stem, const WaveState& s) {
  write_text(dir / (stem + ".profile.field"), to_literal(s.profile));
  write_text(dir / (stem + ".velocity.field"), to_literal(s.velocity));
}

void write_csv(const fs::path& path, const Trace& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_trace_csv(os, trace);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ',');) {
    double x = 0.0;
    if (!parse_double(tok, x)) throw InputError("bad number '" + tok + "' in list");
    out.push_back(x);
  }
  return out;
}

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;

  SimConfig load() const {
    SimConfig cfg;
    if (!config.empty()) {
      try {
        cfg = read_config(config);
      } catch (const ParseError& e) {
        throw InputError(e.message());
      }
    }
    if (seed) cfg.seed = *seed;
    return cfg;
  }

  std::optional<int> dim() const {
    if (config.empty()) return std::nullopt;
    return load().d;
  }

  fs::path out() const {
    fs::create_directories(out_dir);
    return out_dir;
  }
};

int cmd_simulate(const Common& c, const std::string& initial, const std::string& final, const std::string& sched_path) {
  SimConfig cfg = c.load();
  const WaveState s0 = load_state(initial, c.dim());
  if (c.config.empty()) cfg.d = s0.dim();
  std::optional<WaveState> target;
  if (!final.empty()) target = load_state(final, s0.dim());
  ControlSchedule sched(s0.dim());
  if (!sched_path.empty()) {
    try {
      sched = read_schedule(sched_path, s0.dim());
    } catch (const ParseError& e) {
      throw InputError(e.message());
    }
  }
  const RunResult r = run_schedule(s0, sched, target, cfg);
  const fs::path dir = c.out();
  write_csv(dir / "trace.csv", r.trace);
  write_state(dir, "final", r.final);
  std::cout << "total_time " << format_double(sched.total_time()) << '\n'
            << "truncation_residual " << format_double(r.truncation_residual) << '\n';
  if (target) std::cout << "error " << format_double(state_error(r.final, *target)) << '\n';
  return 0;
}

int cmd_synthesize(const Common& c, const std::string& initial, const std::string& final, double eps, double T,
                   bool exact_time, bool ideal) {
  SimConfig cfg = c.load();
  const WaveState s0 = load_state(initial, c.dim());
  const WaveState s1 = load_state(final, s0.dim());
  if (c.config.empty()) cfg.d = s0.dim();
  if (!(eps > 0.0) || !(T > 0.0)) throw InputError("--eps and --T must be positive");
  if (s0.is_zero()) throw InputError(initial + ": (0, 0) is an equilibrium and cannot be steered");

  const TransferPlan plan = plan_transfer(s0, s1, eps, T, exact_time, cfg.synth_options(ideal));
  const ControlSchedule sched = plan.schedule(s0.dim());
  SimConfig check = cfg;
  check.truncation_fraction = 0.0;
  const RunResult r = run_schedule(s0, sched, s1, check);
  const double err = state_error(r.final, s1);

  const fs::path dir = c.out();
  write_schedule(dir / "schedule.txt", sched);
  write_csv(dir / "trace.csv", r.trace);
  write_state(dir, "final", r.final);
  std::ostringstream p;
  p << "# torwave transfer plan\n";
  for (const auto& [k, v] : plan.parameters) p << k << " = " << format_double(v) << '\n';
  double t = 0.0;
  for (const auto& ph : plan.phases) {
    p << "phase " << ph.label << " start=" << format_double(t) << " duration=" << format_double(ph.schedule.total_time())
      << " segments=" << ph.schedule.segments().size();
    if (ph.multiplier) p << " shift_error=" << format_double(ph.error) << " converged=" << (ph.converged ? 1 : 0);
    p << '\n';
    t += ph.schedule.total_time();
  }
  write_text(dir / "plan.txt", p.str());
  std::ostringstream rep;
  rep << "eps = " << format_double(eps) << "\nT = " << format_double(T) << "\nexact_time = " << (exact_time ? 1 : 0)
      << "\nideal_kicks = " << (ideal ? 1 : 0) << "\ntotal_time = " << format_double(sched.total_time())
      << "\npredicted_error = " << format_double(plan.predicted_error) << "\nmeasured_error = " << format_double(err)
      << "\ntruncation_residual = " << format_double(r.truncation_residual) << "\nsegments = " << sched.segments().size()
      << "\nstatus = " << (err < eps ? "met" : "unmet") << '\n';
  write_text(dir / "report.txt", rep.str());
  std::cout << rep.str();
  return err < eps ? 0 : 2;
}

int cmd_saturate(const Common& c, const std::string& target) {
  std::optional<int> dim = c.dim();
  if (!dim) dim = file_dim(target);
  const FourierField f = load_field(target, dim ? dim : std::optional<int>(1));
  const std::string dump = to_sexpr(decompose(f));
  if (c.out_dir != ".") write_text(c.out() / "decomposition.txt", dump);
  std::cout << dump;
  return 0;
}

int cmd_limits(const Common& c, const std::string& kind, const std::string& field, const std::string& initial,
               const std::string& taus_text) {
  SimConfig cfg = c.load();
  std::optional<int> dim = c.dim();
  if (!dim && !field.empty()) dim = file_dim(field);
  const int d = dim.value_or(1);
  const FourierField phi = field.empty() ? FourierField::cosine(ModeIndex::unit(d, 0)) : load_field(field, d);
  const WaveState s0 =
      initial.empty() ? WaveState{FourierField::constant(d, 1.0), FourierField(d)} : load_state(initial, d);
  const std::vector<double> taus = parse_list(taus_text);
  std::vector<LimitKind> kinds;
  if (kind == "limit1" || kind == "both") kinds.push_back(LimitKind::Limit1);
  if (kind == "limit2" || kind == "both") kinds.push_back(LimitKind::Limit2);
  if (kinds.empty()) throw InputError("--kind must be limit1, limit2 or both");
  std::ostringstream csv;
  csv << "kind,tau,error\n";
  for (LimitKind k : kinds) {
    LimitStudy st;
    try {
      st = limit_study(k, phi, s0, taus, cfg.policy());
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
    const char* name = k == LimitKind::Limit1 ? "limit1" : "limit2";
    std::cout << name << "\n  tau          error\n";
    for (const auto& [tau, err] : st.rows) {
      std::cout << "  " << format_double(tau) << "  " << format_double(err) << '\n';
      csv << name << ',' << format_double(tau) << ',' << format_double(err) << '\n';
    }
    std::cout << "  order " << format_double(st.order) << '\n';
  }
  write_text(c.out() / "limits.csv", csv.str());
  return 0;
}

int cmd_moment(const Common& c, const std::string& w0p, const std::string& w1p, double T) {
  SimConfig cfg = c.load();
  std::optional<int> dim = c.dim();
  if (!dim) dim = file_dim(w0p);
  if (!dim) dim = file_dim(w1p);
  const FourierField w0 = load_field(w0p, dim.value_or(1));
  const FourierField w1 = load_field(w1p, w0.dim());
  if (!(T > 0.0)) throw InputError("--T must be positive");
  const MomentVelocity mv = moment_velocity(w0, w1, T, cfg.seed);
  const fs::path dir = c.out();
  write_text(dir / "f.field", to_literal(mv.f));
  std::ostringstream rep;
  rep << "tau = " << format_double(mv.tau) << "\nmargin = " << format_double(mv.margin) << '\n';
  write_text(dir / "moment.txt", rep.str());
  std::cout << rep.str() << to_literal(mv.f);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilinear wave control on the torus: simulation and schedule synthesis"};
  app.require_subcommand(1);
  Common common;
  std::string initial, final, schedule, kind = "both", field, taus = "0.1,0.01,0.001,0.0001";
  double eps = 0.1, T = 0.5;
  bool exact_time = false, ideal = false;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out-dir", common.out_dir, "directory for output files");
    sub->add_option("--seed", seed, "seed for randomized scans (overrides the config)");
  };

  auto* sim = app.add_subcommand("simulate", "run a schedule and write trace.csv and the final state");
  add_common(sim);
  sim->add_option("--initial", initial, "initial state: profile.field,velocity.field")->required();
  sim->add_option("--final", final, "optional target state for the error column");
  sim->add_option("--schedule", schedule, "schedule file (empty schedule if omitted)");

  auto* syn = app.add_subcommand("synthesize", "plan a transfer and write schedule, plan and report");
  add_common(syn);
  syn->add_option("--initial", initial, "initial state: profile.field,velocity.field")->required();
  syn->add_option("--final", final, "target state: profile.field,velocity.field")->required();
  syn->add_option("--eps", eps, "target accuracy in H1 x L2");
  syn->add_option("--T", T, "time budget");
  syn->add_flag("--exact-time", exact_time, "pad at (1, 0) so that the total time is exactly T");
  syn->add_flag("--ideal-kicks", ideal, "replace realized kicks by exact impulses");

  auto* sat = app.add_subcommand("saturate", "print the saturation decomposition of a field");
  add_common(sat);
  sat->add_option("target", field, "field file")->required();

  auto* lim = app.add_subcommand("verify-limits", "tabulate the small-time limits");
  add_common(lim);
  lim->add_option("--kind", kind, "limit1, limit2 or both");
  lim->add_option("--field", field, "xi (limit1) or psi (limit2); default cos(x_1)");
  lim->add_option("--initial", initial, "initial state; default (1, 0)");
  lim->add_option("--taus", taus, "comma-separated decreasing list");

  auto* mom = app.add_subcommand("moment", "glide time and velocity carrying w0 to w1");
  add_common(mom);
  mom->add_option("--initial", initial, "w0 field file")->required();
  mom->add_option("--final", final, "w1 field file")->required();
  mom->add_option("--T", T, "glide budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  for (auto* sub : {sim, syn, sat, lim, mom})
    if (sub->parsed() && sub->count("--seed") > 0) common.seed = seed;

  try {
    if (sim->parsed()) return cmd_simulate(common, initial, final, schedule);
    if (syn->parsed()) return cmd_synthesize(common, initial, final, eps, T, exact_time, ideal);
    if (sat->parsed()) return cmd_saturate(common, field);
    if (lim->parsed()) return cmd_limits(common, kind, field, initial, taus);
    if (mom->parsed()) return cmd_moment(common, initial, final, T);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
