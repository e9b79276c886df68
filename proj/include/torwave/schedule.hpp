#pragma once

// Piecewise-constant control schedules and their text form.
//
//   # torwave schedule dim=<d>
//   <duration> <p_0> ... <p_2d>
//   KICK <c> <field-file>
//
// Field files named by KICK lines are resolved relative to the schedule file.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string_view>
#include <string>
#include <vector>

#include "torwave/errors.hpp"
#include "torwave/field_io.hpp"
#include "torwave/propagators.hpp"

namespace torwave {

/// Zero-duration exact impulse e^{c phi B}.
struct IdealKick {
  double c = 1.0;
  FourierField phi;
};

struct ControlSegment {
  double duration = 0.0;
  std::vector<double> p;
  std::optional<IdealKick> ideal_kick;

  static ControlSegment free(int dim, double t) {
    return {t, std::vector<double>(static_cast<std::size_t>(2 * dim + 1), 0.0), std::nullopt};
  }
  static ControlSegment impulse(int dim, double c, FourierField phi) {
    return {0.0, std::vector<double>(static_cast<std::size_t>(2 * dim + 1), 0.0), IdealKick{c, std::move(phi)}};
  }

  bool is_free() const {
    if (ideal_kick) return false;
    for (double x : p)
      if (x != 0.0) return false;
    return true;
  }
};

class ControlSchedule {
 public:
  explicit ControlSchedule(int dim = 1) : dim_(ModeIndex(dim).dim()) {}

  int dim() const noexcept { return dim_; }
  const std::vector<ControlSegment>& segments() const noexcept { return segments_; }
  bool empty() const noexcept { return segments_.empty(); }
  double total_time() const noexcept { return total_; }

  void push(ControlSegment s) {
    if (s.p.size() != static_cast<std::size_t>(2 * dim_ + 1))
      throw DimensionMismatch("segment has " + std::to_string(s.p.size()) + " amplitudes, expected " +
                              std::to_string(2 * dim_ + 1));
    if (!(s.duration >= 0.0)) throw std::invalid_argument("segment duration must be nonnegative");
    if (s.ideal_kick) {
      if (s.duration != 0.0) throw std::invalid_argument("an ideal kick has zero duration");
      require_same_dim(s.ideal_kick->phi, FourierField(dim_));
    }
    total_ += s.duration;
    segments_.push_back(std::move(s));
  }

  void push_free(double t) {
    if (t > 0.0) push(ControlSegment::free(dim_, t));
  }

  /// Appends `later` so that it runs after everything already here.
  void append(const ControlSchedule& later) {
    if (later.dim_ != dim_) throw DimensionMismatch("schedules on different tori");
    for (const auto& s : later.segments_) push(s);
  }

 private:
  int dim_;
  std::vector<ControlSegment> segments_;
  double total_ = 0.0;
};

/// q * p: run p first, then q.
inline ControlSchedule operator*(const ControlSchedule& q, const ControlSchedule& p) {
  ControlSchedule out = p;
  out.append(q);
  return out;
}

/// Time stepping used when folding schedules: at most dt_max, and at least
/// min_steps steps per controlled segment.
struct StepPolicy {
  double dt_max = 1e-3;
  long long min_steps = 64;

  SplittingParams for_segment(double duration) const {
    double dt = dt_max;
    if (min_steps > 0 && duration > 0.0) dt = std::min(dt, duration / static_cast<double>(min_steps));
    return SplittingParams{dt};
  }
};

/// Runs one segment.
inline WaveState apply_segment(const WaveState& s, const ControlSegment& seg, const StepPolicy& policy,
                               TruncationMeter* meter = nullptr) {
  if (seg.ideal_kick) {
    WaveState out = kick(s, seg.ideal_kick->c, seg.ideal_kick->phi);
    return meter ? meter->clip(std::move(out)) : out;
  }
  if (seg.duration == 0.0) return s;
  return constant_control_evolve(s, seg.p, seg.duration, policy.for_segment(seg.duration), meter);
}

inline WaveState apply_schedule(WaveState s, const ControlSchedule& sched, const StepPolicy& policy = {},
                                TruncationMeter* meter = nullptr) {
  require_same_dim(s.profile, FourierField(sched.dim()));
  for (const auto& seg : sched.segments()) s = apply_segment(s, seg, policy, meter);
  return s;
}

/// Writes the schedule to `path`; ideal-kick profiles go to sibling files
/// <stem>.kick<i>.field.
inline void write_schedule(const std::filesystem::path& path, const ControlSchedule& sched) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "# torwave schedule dim=" << sched.dim() << '\n';
  int kicks = 0;
  for (const auto& seg : sched.segments()) {
    if (seg.ideal_kick) {
      const std::string name = path.stem().string() + ".kick" + std::to_string(kicks++) + ".field";
      std::ofstream fs(path.parent_path() / name);
      if (!fs) throw std::runtime_error("cannot write " + (path.parent_path() / name).string());
      write_field(fs, seg.ideal_kick->phi);
      os << "KICK " << format_double(seg.ideal_kick->c) << ' ' << name << '\n';
      continue;
    }
    os << format_double(seg.duration);
    for (double x : seg.p) os << ' ' << format_double(x);
    os << '\n';
  }
}

/// Reads a schedule; errors carry the offending line of the schedule.
inline ControlSchedule read_schedule(std::istream& is, const std::filesystem::path& base_dir = {},
                                     std::optional<int> dim = std::nullopt) {
  std::optional<ControlSchedule> out;
  if (dim) out.emplace(*dim);
  auto number = [](std::string_view tok, int line_no) {
    double x = 0.0;
    if (!parse_double(tok, x)) throw ParseError(line_no, "bad number '" + std::string(tok) + "'");
    return x;
  };
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      if (!out)
        if (auto d = detail::dim_directive(line.substr(hash))) out.emplace(*d);
      line = line.substr(0, hash);
    }
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] == "KICK") {
      if (tok.size() != 3) throw ParseError(line_no, "expected: KICK <c> <field-file>");
      if (!out) throw ParseError(line_no, "KICK before the dimension is known");
      const double c = number(tok[1], line_no);
      const auto fpath = base_dir / std::string(tok[2]);
      std::ifstream fs(fpath);
      if (!fs) throw ParseError(line_no, "cannot open kick field " + fpath.string());
      FourierField phi;
      try {
        phi = read_field(fs, out->dim());
      } catch (const ParseError& e) {
        throw ParseError(line_no, fpath.string() + ":" + std::to_string(e.line()) + ": " + e.message());
      }
      out->push(ControlSegment::impulse(out->dim(), c, std::move(phi)));
      continue;
    }
    if (tok.size() < 4 || tok.size() % 2 != 0) throw ParseError(line_no, "expected: <duration> <p_0> ... <p_2d>");
    const int d = static_cast<int>(tok.size() - 2) / 2;
    if (!out) out.emplace(d);
    if (d != out->dim())
      throw ParseError(line_no, "segment has " + std::to_string(tok.size() - 1) + " amplitudes, expected " +
                                    std::to_string(2 * out->dim() + 1));
    ControlSegment seg;
    seg.duration = number(tok[0], line_no);
    if (!(seg.duration >= 0.0)) throw ParseError(line_no, "negative duration");
    for (std::size_t i = 1; i < tok.size(); ++i) seg.p.push_back(number(tok[i], line_no));
    out->push(std::move(seg));
  }
  if (!out) throw ParseError(0, "empty schedule without a dim= header");
  return *out;
}

inline ControlSchedule read_schedule(const std::filesystem::path& path, std::optional<int> dim = std::nullopt) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_schedule(is, path.parent_path(), dim);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
}

}  // namespace torwave
