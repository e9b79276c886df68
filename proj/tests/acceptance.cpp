// Acceptance suite.  Prints one PASS/FAIL line per criterion; exit status is
// the number of failed criteria.  Usage: torwave_acceptance [criterion...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "torwave/harness.hpp"

using namespace torwave;
using torwave::testing::coeff_distance;
using torwave::testing::random_field;
using torwave::testing::random_state;
using torwave::testing::uniform;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

FourierField cosine(int d, int axis, int m = 1) {
  ModeIndex k(d);
  k[axis] = m;
  return FourierField::cosine(k);
}

FourierField sine(int d, int axis, int m = 1) {
  ModeIndex k(d);
  k[axis] = m;
  return FourierField::sine(k);
}

Outcome exactness() {
  std::mt19937_64 rng(2024);
  double group = 0.0, energy_drift = 0.0, inversion = 0.0, moment = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 2;
    const WaveState s = random_state(rng, d, 8, 6);
    const double t1 = uniform(rng, -3.0, 3.0), t2 = uniform(rng, -3.0, 3.0);
    group = std::max(group, state_error(free_evolve(free_evolve(s, t1), t2), free_evolve(s, t1 + t2)));
    energy_drift = std::max(energy_drift, rel_gap(energy(free_evolve(s, t1)), energy(s)));
    const FourierField phi = random_field(rng, d, 8, 4);
    const double c = uniform(rng, -2.0, 2.0);
    inversion = std::max(inversion, state_error(kick(kick(s, c, phi), -c, phi), s));
    const FourierField w1 = random_field(rng, d, 8, 6);
    const MomentVelocity mv = moment_velocity(s.profile, w1, uniform(rng, 0.01, 2.0), static_cast<std::uint64_t>(trial));
    moment = std::max(moment, coeff_distance(free_evolve(WaveState{s.profile, mv.f}, mv.tau).profile, w1));
  }
  Outcome o;
  o.pass = group <= 1e-11 && energy_drift <= 1e-11 && inversion <= 1e-12 && moment <= 1e-12;
  o.detail = "group " + fmt(group) + ", energy " + fmt(energy_drift) + ", kick inversion " + fmt(inversion) +
             ", moment round trip " + fmt(moment) + " over 100 instances";
  return o;
}

Outcome saturation() {
  double worst = 0.0;
  int cases = 0;
  for (int d = 1; d <= 2; ++d) {
    const int span = 7;
    const int count = d == 1 ? span : span * span;
    for (int idx = 0; idx < count; ++idx) {
      ModeIndex k(d);
      k[0] = idx % span - 3;
      if (d == 2) k[1] = idx / span - 3;
      for (TrigKind kind : {TrigKind::Cos, TrigKind::Sin}) {
        if (kind == TrigKind::Sin && k.is_zero()) continue;
        for (int sign : {1, -1}) {
          const auto v = sample_grid(expand(saturate_mode(k, kind, sign)), 64);
          for (std::size_t i = 0; i < v.size(); ++i) {
            const auto x = torwave::testing::grid_point(i, d, 64);
            double arg = 0.0;
            for (int j = 0; j < d; ++j) arg += k[j] * x[static_cast<std::size_t>(j)];
            const double want = sign * (kind == TrigKind::Cos ? std::cos(arg) : std::sin(arg));
            worst = std::max(worst, std::abs(v[i] - want));
          }
          ++cases;
        }
      }
    }
  }
  return {worst <= 1e-12, "max grid deviation " + fmt(worst) + " over " + std::to_string(cases) + " trees"};
}

Outcome limits() {
  const int d = 2;
  const FourierField one = FourierField::constant(d, 1.0);
  const std::vector<FourierField> fields{one, cosine(d, 0), sine(d, 0), cosine(d, 0) + sine(d, 1)};
  const std::vector<WaveState> starts{{one, FourierField(d)}, {cosine(d, 0), FourierField(d)}, {cosine(d, 0), sine(d, 0)}};
  const std::vector<double> taus{1e-1, 1e-2, 1e-3, 1e-4};
  int studies = 0, bad = 0;
  double worst_gain = 0.0;
  for (LimitKind kind : {LimitKind::Limit1, LimitKind::Limit2})
    for (const auto& f : fields)
      for (const auto& s : starts) {
        const LimitStudy st = limit_study(kind, f, s, taus);
        bool ok = st.rows.back().second <= st.rows.front().second / 5.0;
        for (std::size_t i = 1; i < st.rows.size(); ++i) ok = ok && st.rows[i].second < st.rows[i - 1].second;
        const double gain = st.rows.back().second / st.rows.front().second;
        worst_gain = std::max(worst_gain, gain);
        bad += ok ? 0 : 1;
        ++studies;
      }
  const WaveState s{cosine(1, 0) + FourierField::constant(1, 0.3), sine(1, 0)};
  const std::vector<double> p{0.5, 1.0, -0.7};
  const double t = 0.5, dt = 0.05;
  const WaveState ref = constant_control_evolve(s, p, t, SplittingParams{dt / 64});
  const double ratio = state_error(constant_control_evolve(s, p, t, SplittingParams{dt}), ref) /
                       state_error(constant_control_evolve(s, p, t, SplittingParams{dt / 2}), ref);
  Outcome o;
  o.pass = bad == 0 && ratio >= 3.5 && ratio <= 4.5;
  o.detail = std::to_string(studies - bad) + "/" + std::to_string(studies) +
             " studies decreasing, worst err(1e-4)/err(1e-1) " + fmt(worst_gain) + ", Richardson ratio " + fmt(ratio);
  return o;
}

Outcome velocity_shift() {
  const int d = 2;
  const WaveState s{FourierField::constant(d, 1.0), FourierField(d)};
  ModeIndex diag(d);
  diag[0] = diag[1] = 1;
  const std::vector<std::pair<std::string, FourierField>> targets{
      {"cos 2x1", cosine(d, 0, 2)}, {"sin 2x1", sine(d, 0, 2)}, {"cos(x1+x2)", FourierField::cosine(diag)}};
  Outcome o;
  for (const auto& [name, phi] : targets) {
    const VelocityShift v = schedule_velocity_shift(s, phi, 1e-2, 0.5);
    const bool ok = v.error < 1e-2 && v.schedule.total_time() <= 0.5;
    o.pass = o.pass && ok;
    o.detail += (o.detail.empty() ? "" : ", ") + name + " " + fmt(v.error) + " in " + fmt(v.schedule.total_time());
  }
  return o;
}

SimConfig desk_config() {
  SimConfig cfg;
  cfg.d = 1;
  cfg.N_max = 8;
  cfg.truncation_fraction = 0.0;
  return cfg;
}

double measured_error(const WaveState& a, const WaveState& b, double T, bool exact, double* total = nullptr) {
  const SimConfig cfg = desk_config();
  const TransferPlan p = plan_transfer(a, b, 0.1, T, exact, cfg.synth_options());
  const ControlSchedule sched = p.schedule(1);
  if (total) *total = sched.total_time();
  return state_error(run_schedule(a, sched, b, cfg).final, b);
}

const WaveState main_initial{FourierField::cosine(ModeIndex{1}), FourierField(1)};
const WaveState main_final{FourierField::sine(ModeIndex{1}) + FourierField::constant(1, 0.3),
                           FourierField::cosine(ModeIndex{2})};
const WaveState alt_initial{FourierField(1), FourierField::cosine(ModeIndex{1})};
const WaveState alt_final{FourierField::cosine(ModeIndex{1}), FourierField(1)};

Outcome transfer() {
  double total = 0.0;
  const double e_main = measured_error(main_initial, main_final, 0.5, false);
  const double e_exact = measured_error(main_initial, main_final, 0.5, true, &total);
  const double e_alt = measured_error(alt_initial, alt_final, 0.5, false);
  Outcome o;
  o.pass = e_main < 0.1 && std::abs(total - 0.5) <= 1e-12 && e_alt < 0.1;
  o.detail = "main " + fmt(e_main) + ", exact-time " + fmt(e_exact) + " over " + fmt(total) +
             " (|T - 0.5| = " + fmt(std::abs(total - 0.5)) + "), (0,cos x)->(cos x,0) " + fmt(e_alt);
  return o;
}

Outcome small_time() {
  Outcome o;
  for (double T : {0.5, 0.05, 0.005}) {
    const double e = measured_error(main_initial, main_final, T, false);
    o.pass = o.pass && e < 0.1;
    o.detail += (o.detail.empty() ? "" : ", ") + std::string("T=") + fmt(T) + " " + fmt(e);
  }
  return o;
}

// Largest final/initial distance ratio over 20 seeded perturbations.
double lipschitz_ratio(const ControlSchedule& sched) {
  const SimConfig cfg = desk_config();
  std::mt19937_64 rng(7);
  const WaveState base = run_schedule(alt_initial, sched, std::nullopt, cfg).final;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    WaveState delta = random_state(rng, 1, 4, 4);
    const double n = std::hypot(sobolev_norm(delta.profile, 1), sobolev_norm(delta.velocity, 0));
    const double scale = 1e-3 * uniform(rng, 0.1, 1.0) / n;
    delta = {scale * delta.profile, scale * delta.velocity};
    const WaveState start{alt_initial.profile + delta.profile, alt_initial.velocity + delta.velocity};
    const WaveState out = run_schedule(start, sched, std::nullopt, cfg).final;
    worst = std::max(worst, state_error(out, base) / state_error(start, alt_initial));
  }
  return worst;
}

constexpr double kLipschitzRegression = 17.0505163851;

Outcome lipschitz() {
  const SimConfig cfg = desk_config();
  const ControlSchedule sched = plan_transfer(alt_initial, alt_final, 0.1, 0.5, false, cfg.synth_options()).schedule(1);
  const double a = lipschitz_ratio(sched);
  const double b = lipschitz_ratio(sched);
  Outcome o;
  o.pass = std::isfinite(a) && rel_gap(a, b) <= 1e-6 && rel_gap(a, kLipschitzRegression) <= 1e-6;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", a);
  o.detail = std::string("max ratio ") + buf + ", rerun gap " + fmt(rel_gap(a, b)) + ", recorded " +
             std::to_string(kLipschitzRegression);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exactness", exactness},     {"saturation", saturation}, {"limit studies", limits},
      {"velocity shift", velocity_shift}, {"transfer", transfer},     {"small time", small_time},
      {"lipschitz", lipschitz}};
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(std::atoi(argv[i]));
  if (chosen.empty())
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) chosen.push_back(i);
  int failed = 0;
  for (int n : chosen) {
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", n);
      return 64;
    }
    const auto& [name, run] = criteria[static_cast<std::size_t>(n - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", n, name.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed;
}
