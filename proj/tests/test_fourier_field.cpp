#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"
#include "torwave/fourier_field.hpp"
#include "torwave/wave_state.hpp"

using namespace torwave;
using torwave::testing::coeff_distance;
using torwave::testing::grid_point;
using torwave::testing::random_field;

namespace {

const ModeIndex e1_1d{1};
const ModeIndex e1_2d{1, 0};

bool hermitian(const FourierField& f) {
  for (const auto& [k, c] : f.coeffs())
    if (std::abs(f.coeff(-k) - std::conj(c)) > 0.0) return false;
  return true;
}

}  // namespace

TEST_CASE("make_mu builds the low-mode control profiles", "[fourier]") {
  const FourierField one = make_mu(0, 2);
  REQUIRE(one.size() == 1);
  CHECK(one.coeff(ModeIndex{0, 0}) == Complex(1.0, 0.0));

  const FourierField c = make_mu(1, 2);
  REQUIRE(c.size() == 2);
  CHECK(c.coeff(ModeIndex{1, 0}) == Complex(0.5, 0.0));
  CHECK(c.coeff(ModeIndex{-1, 0}) == Complex(0.5, 0.0));

  const FourierField s = make_mu(2, 1);
  REQUIRE(s.size() == 2);
  CHECK(s.coeff(ModeIndex{1}) == Complex(0.0, -0.5));
  CHECK(s.coeff(ModeIndex{-1}) == Complex(0.0, 0.5));

  CHECK(make_mu(4, 2).coeff(ModeIndex{0, 1}) == Complex(0.0, -0.5));
  CHECK_THROWS_AS(make_mu(3, 1), std::out_of_range);
  CHECK_THROWS_AS(make_mu(-1, 2), std::out_of_range);
}

TEST_CASE("control_profile and control_coefficients are inverse", "[fourier]") {
  const std::vector<double> p{3.0, 2.0, -1.0, 0.5, 0.25};
  const FourierField f = control_profile(p, 2);
  FourierField manual = 3.0 * make_mu(0, 2) + 2.0 * make_mu(1, 2) - 1.0 * make_mu(2, 2) + 0.5 * make_mu(3, 2) +
                        0.25 * make_mu(4, 2);
  CHECK(coeff_distance(f, manual) < 1e-15);
  const auto back = control_coefficients(f);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(back[i] == Catch::Approx(p[i]).margin(1e-15));
  CHECK_THROWS(control_coefficients(FourierField::cosine(ModeIndex{2, 0})));
}

TEST_CASE("multiply is convolution of coefficients", "[fourier]") {
  const FourierField c = FourierField::cosine(e1_2d);
  const FourierField s = FourierField::sine(e1_2d);

  SECTION("cos^2 = 1/2 + cos(2x)/2") {
    const FourierField sq = multiply(c, c);
    REQUIRE(sq.size() == 3);
    CHECK(std::abs(sq.coeff(ModeIndex{0, 0}) - 0.5) < 1e-15);
    CHECK(std::abs(sq.coeff(ModeIndex{2, 0}) - 0.25) < 1e-15);
    CHECK(std::abs(sq.coeff(ModeIndex{-2, 0}) - 0.25) < 1e-15);
  }
  SECTION("f * 1 = f") {
    std::mt19937_64 rng(7);
    const FourierField f = random_field(rng, 2, 4, 12);
    CHECK(coeff_distance(multiply(f, FourierField::constant(2, 1.0)), f) < 1e-15);
  }
  SECTION("cos sin = sin(2x)/2") {
    CHECK(coeff_distance(multiply(c, s), FourierField::sine(ModeIndex{2, 0}, 0.5)) < 1e-15);
  }
  SECTION("dimension mismatch") {
    CHECK_THROWS_AS(multiply(c, FourierField::cosine(e1_1d)), DimensionMismatch);
  }
}

TEST_CASE("multiply is commutative, associative and matches pointwise products", "[fourier][property]") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 2;
    const FourierField f = random_field(rng, d, 3, 6);
    const FourierField g = random_field(rng, d, 3, 6);
    const FourierField h = random_field(rng, d, 2, 4);
    CHECK(coeff_distance(multiply(f, g), multiply(g, f)) < 1e-12);
    CHECK(coeff_distance(multiply(multiply(f, g), h), multiply(f, multiply(g, h))) < 1e-12);
    CHECK(hermitian(multiply(f, g)));

    const int n = 16;
    const auto fg = sample_grid(multiply(f, g), n);
    const auto fv = sample_grid(f, n);
    const auto gv = sample_grid(g, n);
    double worst = 0.0;
    for (std::size_t i = 0; i < fg.size(); ++i) worst = std::max(worst, std::abs(fg[i] - fv[i] * gv[i]));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("sobolev_norm uses the (1+|k|^2)^s weight", "[fourier]") {
  CHECK(sobolev_norm(FourierField::constant(1, 1.0), 0) == Catch::Approx(1.0));
  CHECK(sobolev_norm(FourierField::cosine(e1_1d), 0) == Catch::Approx(std::sqrt(0.5)));
  CHECK(sobolev_norm(FourierField::cosine(e1_1d), 1) == Catch::Approx(1.0));
  CHECK(sobolev_norm(FourierField::cosine(e1_1d), 2) == Catch::Approx(std::sqrt(2.0 * 4.0 * 0.25)));
  CHECK(sobolev_norm(FourierField(2), 1) == 0.0);
  CHECK_THROWS(sobolev_norm(FourierField::constant(1, 1.0), 3));
}

TEST_CASE("Parseval against grid quadrature", "[fourier][property]") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 1 + trial % 2;
    const FourierField f = random_field(rng, d, 4, 8);
    const auto v = sample_grid(f, 32);
    double mean_sq = 0.0;
    for (double x : v) mean_sq += x * x;
    mean_sq /= static_cast<double>(v.size());
    CHECK(std::pow(sobolev_norm(f, 0), 2) == Catch::Approx(mean_sq).epsilon(1e-8));
  }
}

TEST_CASE("state_error is the H1 x L2 distance", "[fourier]") {
  const FourierField c = FourierField::cosine(e1_1d);
  const WaveState a{c, FourierField(1)};
  CHECK(state_error(a, a) == 0.0);
  CHECK(state_error(a, WaveState{c, c}) == Catch::Approx(std::sqrt(0.5)));
  CHECK(state_error(WaveState{FourierField(1), FourierField(1)}, a) == Catch::Approx(1.0));
  CHECK_THROWS_AS(state_error(a, WaveState::zero(2)), DimensionMismatch);
}

TEST_CASE("sample_grid evaluates on the uniform grid", "[fourier]") {
  auto near = [](const std::vector<double>& v, std::vector<double> want) {
    REQUIRE(v.size() == want.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::abs(v[i] - want[i]) > 1e-15) return false;
    return true;
  };
  CHECK(near(sample_grid(FourierField::constant(1, 1.0), 4), {1, 1, 1, 1}));
  CHECK(near(sample_grid(FourierField::cosine(e1_1d), 4), {1, 0, -1, 0}));
  CHECK(near(sample_grid(FourierField::sine(e1_1d), 4), {0, 1, 0, -1}));
  CHECK_THROWS_AS(sample_grid(FourierField::cosine(ModeIndex{2}), 4), AliasingError);

  SECTION("agrees with pointwise trig evaluation in 2d") {
    const FourierField f = FourierField::cosine(ModeIndex{1, 2}, 0.7) + FourierField::sine(ModeIndex{-3, 1}, -1.3);
    const int n = 9;
    const auto v = sample_grid(f, n);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto x = grid_point(i, 2, n);
      const double want = 0.7 * std::cos(x[0] + 2 * x[1]) - 1.3 * std::sin(-3 * x[0] + x[1]);
      CHECK(v[i] == Catch::Approx(want).margin(1e-13));
    }
  }
}

TEST_CASE("project_grid recovers band-limited fields", "[fourier]") {
  SECTION("zeros project to the empty field") {
    std::vector<double> z(64, 0.0);
    CHECK(project_grid(z, 1, 5).empty());
  }
  SECTION("cos^2 from pointwise values") {
    const int n = 16;
    std::vector<double> v(n);
    for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] = std::pow(std::cos(2 * std::numbers::pi * j / n), 2);
    const FourierField c = FourierField::cosine(e1_1d);
    CHECK(coeff_distance(project_grid(v, 1, 2), multiply(c, c)) < 1e-15);
  }
  SECTION("round trip property") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
      const int d = 1 + trial % 2;
      const FourierField f = random_field(rng, d, 5, 10);
      const int n = 2 * f.max_mode() + 1 + trial % 5;
      const FourierField back = project_grid(sample_grid(f, n), d, f.max_mode());
      CHECK(coeff_distance(back, f) < 1e-12);
      CHECK(hermitian(back));
    }
  }
  SECTION("resolution precondition") {
    std::vector<double> v(8, 1.0);
    CHECK_THROWS_AS(project_grid(v, 1, 4), AliasingError);
    CHECK_THROWS(project_grid(std::vector<double>(10, 0.0), 2, 1));
  }
}

TEST_CASE("canonical form completes partners and prunes dust", "[fourier]") {
  FourierField f(1, {{ModeIndex{2}, Complex(1.0, 2.0)}, {ModeIndex{3}, Complex(1e-16, 0.0)}});
  CHECK(f.size() == 2);
  CHECK(f.coeff(ModeIndex{-2}) == Complex(1.0, -2.0));
  FourierField g(1, {{ModeIndex{0}, Complex(1.0, 0.5)}});
  CHECK(g.coeff(ModeIndex{0}).imag() == 0.0);
  CHECK_THROWS_AS(FourierField(2, {{ModeIndex{1}, Complex(1.0)}}), DimensionMismatch);
  CHECK_THROWS(ModeIndex(kMaxDim + 1));
}
