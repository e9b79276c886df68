#include <catch_amalgamated.hpp>

#include <random>

#include "test_support.hpp"
#include "torwave/field_io.hpp"

using namespace torwave;

TEST_CASE("writer emits modes in lexicographic order", "[io]") {
  const FourierField f = FourierField::cosine(ModeIndex{1, 0}) + FourierField::sine(ModeIndex{0, 2}, 3.0);
  const std::string text = to_literal(f);
  CHECK(text ==
        "# torwave field dim=2\n"
        "-1 0  0.5 0\n"
        "0 -2  0 1.5\n"
        "0 2  0 -1.5\n"
        "1 0  0.5 0\n");
}

TEST_CASE("reader accepts any order and completes Hermitian partners", "[io]") {
  const FourierField f = parse_field(
      "# cos x + 0.25\n"
      "1 0.5 0   # only the +1 mode\n"
      "\n"
      "0 0.25 0\n");
  CHECK(f.dim() == 1);
  CHECK(f.coeff(ModeIndex{-1}) == Complex(0.5, 0.0));
  CHECK(f.coeff(ModeIndex{0}) == Complex(0.25, 0.0));
}

TEST_CASE("reader rejects malformed input with a line number", "[io]") {
  auto line_of = [](const std::string& text) {
    try {
      parse_field(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("1 0.5 0\n-1 0.4 0\n") == 2);
  CHECK(line_of("1 0.5\n") == 1);
  CHECK(line_of("1 0 0.5 0\n2 0.5 0\n") == 2);
  CHECK(line_of("x 0.5 0\n") == 1);
  CHECK(line_of("0 1 0.5\n") == 1);
  CHECK(line_of("1 0.5 0\n1 0.5 0\n") == 2);
  CHECK(line_of("1 0.5 0\n-1 0.5 1e-13\n") == -1);
}

TEST_CASE("empty literal needs a dimension", "[io]") {
  CHECK(parse_field("# torwave field dim=3\n").dim() == 3);
  CHECK(parse_field("", 2).empty());
  CHECK_THROWS_AS(parse_field("# nothing here\n"), ParseError);
}

TEST_CASE("write/read round trip is exact", "[io][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const FourierField f = torwave::testing::random_field(rng, 1 + trial % 3, 4, 9);
    const FourierField g = parse_field(to_literal(f));
    CHECK(g.coeffs() == f.coeffs());
  }
}
