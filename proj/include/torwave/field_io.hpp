#pragma once

// Field literal text format: one mode per line, "k1 ... kd  re  im", '#'
// starts a comment.  A comment of the form "# ... dim=<d>" declares the
// dimension, which lets an empty file describe the zero field.

#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "torwave/errors.hpp"
#include "torwave/fourier_field.hpp"

namespace torwave {

/// Shortest round-trip decimal form of x ("0" for both zeros).
inline std::string format_double(double x) {
  if (x == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_int(std::string_view s, int& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<int> dim_directive(std::string_view comment) {
  auto pos = comment.find("dim=");
  if (pos == std::string_view::npos) return std::nullopt;
  std::string_view rest = comment.substr(pos + 4);
  std::size_t end = 0;
  while (end < rest.size() && rest[end] >= '0' && rest[end] <= '9') ++end;
  int d = 0;
  if (!parse_int(rest.substr(0, end), d)) return std::nullopt;
  return d;
}

}  // namespace detail

inline void write_field(std::ostream& out, const FourierField& f) {
  out << "# torwave field dim=" << f.dim() << "\n";
  for (const auto& [k, c] : f.coeffs()) {
    for (int i = 0; i < f.dim(); ++i) out << k[i] << ' ';
    out << ' ' << format_double(c.real()) << ' ' << format_double(c.imag()) << '\n';
  }
}

inline std::string to_literal(const FourierField& f) {
  std::ostringstream os;
  write_field(os, f);
  return os.str();
}

/// Reads a field literal.  Modes may come in any order; a missing -k partner
/// is completed by conjugation, an inconsistent pair (beyond 1e-12) is an error.
inline FourierField read_field(std::istream& in, std::optional<int> dim = std::nullopt) {
  struct Entry {
    Complex value;
    int line;
  };
  std::map<ModeIndex, Entry> entries;
  std::optional<int> declared;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      if (auto d = detail::dim_directive(line.substr(hash)); d && !declared) declared = d;
      line = line.substr(0, hash);
    }
    auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 3) throw ParseError(lineno, "expected 'k1 ... kd re im'");
    const int d = static_cast<int>(tokens.size()) - 2;
    if (!dim) dim = declared ? *declared : d;
    if (d != *dim)
      throw ParseError(lineno, "mode has " + std::to_string(d) + " components, expected " + std::to_string(*dim));
    if (d > kMaxDim) throw ParseError(lineno, "dimension above " + std::to_string(kMaxDim));
    std::vector<int> comps(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
      if (!parse_int(tokens[static_cast<std::size_t>(i)], comps[static_cast<std::size_t>(i)]))
        throw ParseError(lineno, "bad integer '" + std::string(tokens[static_cast<std::size_t>(i)]) + "'");
    double re = 0.0, im = 0.0;
    if (!parse_double(tokens[tokens.size() - 2], re) || !parse_double(tokens.back(), im))
      throw ParseError(lineno, "bad amplitude");
    ModeIndex k{std::span<const int>(comps)};
    if (!entries.emplace(k, Entry{Complex(re, im), lineno}).second)
      throw ParseError(lineno, "mode " + k.to_string() + " listed twice");
  }
  if (!dim) dim = declared;
  if (!dim) throw ParseError(0, "empty field literal without a dim= declaration");
  if (declared && *declared != *dim) throw ParseError(0, "dim= declaration disagrees with the data");

  FourierField::CoeffMap coeffs;
  for (const auto& [k, e] : entries) {
    const ModeIndex nk = -k;
    if (k == nk) {
      if (std::abs(e.value.imag()) > 1e-12) throw ParseError(e.line, "zero mode must be real");
    } else if (auto it = entries.find(nk); it != entries.end()) {
      if (std::abs(e.value - std::conj(it->second.value)) > 1e-12)
        throw ParseError(std::max(e.line, it->second.line),
                         "modes " + k.to_string() + " and " + nk.to_string() + " are not complex conjugates");
    }
    coeffs.emplace(k, e.value);
  }
  return FourierField(*dim, std::move(coeffs));
}

inline FourierField parse_field(const std::string& text, std::optional<int> dim = std::nullopt) {
  std::istringstream is(text);
  return read_field(is, dim);
}

}  // namespace torwave
