#include <doctest.h>

#include <cmath>

#include "tsgp/error.hpp"
#include "tsgp/expr.hpp"

using namespace tsgp;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double v : values) m(0, j++) = v;
  return m;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("evaluate: protected division returns 1 on a zero denominator") {
  const ExprTree t = parse_text("PDIV v1 v2");
  CHECK(evaluate(t, row({3.0, 0.0}))(0) == 1.0);
  CHECK(evaluate(t, row({3.0, 2.0}))(0) == 1.5);
}

TEST_CASE("evaluate: arithmetic and identity") {
  CHECK(evaluate(parse_text("ADD v1 MUL v2 C+0.3"), row({1.0, 2.0}))(0) ==
        doctest::Approx(1.6).epsilon(1e-15));
  Matrix x(3, 3);
  x << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Vector v = evaluate(parse_text("v3"), x);
  CHECK(v == x.col(2));
}

TEST_CASE("evaluate: variable beyond the input columns is structural") {
  CHECK(code_of([] { evaluate(parse_text("v3"), row({1.0, 2.0})); }) == ErrorCode::kStructural);
}

TEST_CASE("serialize: prefix order") {
  const ExprTree t = parse_text("ADD v1 MUL v2 C+0.3");
  CHECK(serialize_tokens(t) == TokenSeq{"ADD", "v1", "MUL", "v2", "C+0.3"});
  CHECK(serialize_tokens(parse_text("v2")) == TokenSeq{"v2"});
  CHECK(to_infix(t) == "(v1 + (v2 * 0.3))");
}

TEST_CASE("parse: arity errors") {
  const TokenSeq ok{"ADD", "v1", "v2"};
  CHECK(parse_prefix(std::span<const std::string>(ok)).size() == 3);
  const TokenSeq incomplete{"ADD", "v1"};
  const TokenSeq trailing{"v1", "v2"};
  const TokenSeq empty{};
  CHECK(code_of([&] { parse_prefix(std::span<const std::string>(incomplete)); }) ==
        ErrorCode::kIncomplete);
  CHECK(code_of([&] { parse_prefix(std::span<const std::string>(trailing)); }) ==
        ErrorCode::kTrailing);
  CHECK(code_of([&] { parse_prefix(std::span<const std::string>(empty)); }) ==
        ErrorCode::kIncomplete);
}

TEST_CASE("tokens: names round trip and reject unknown symbols") {
  for (int i = 0; i < PrimitiveSet::kNumConstants; ++i) {
    const Node n = Node::constant(i);
    CHECK(token_from_name(token_name(n)) == n);
  }
  CHECK(token_name(Node::constant(5)) == "C+0.0");
  CHECK(PrimitiveSet::constant_value(0) == -0.5);
  CHECK(PrimitiveSet::constant_value(8) == 0.3);
  CHECK(code_of([] { token_from_name("C-0.0"); }) == ErrorCode::kUnknownToken);
  CHECK(code_of([] { token_from_name("EXP"); }) == ErrorCode::kUnknownToken);
  CHECK(code_of([] { token_from_name("v0"); }) == ErrorCode::kUnknownToken);
}

TEST_CASE("size and depth") {
  CHECK(parse_text("v1").size() == 1);
  CHECK(parse_text("v1").depth() == 0);
  CHECK(parse_text("ADD v1 v2").size() == 3);
  CHECK(parse_text("ADD v1 v2").depth() == 1);
  Rng rng(1);
  const PrimitiveSet prims;
  const ExprTree full3 = random_tree(InitMethod::kFull, 3, 3, prims, rng);
  CHECK(full3.size() == 15);
  CHECK(full3.depth() == 3);
}

TEST_CASE("random_tree: FULL and GROW shape") {
  const PrimitiveSet prims;
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const ExprTree t = random_tree(InitMethod::kFull, 2, 2, prims, rng);
    CHECK(t.size() == 7);
    const auto depths = t.node_depths();
    for (int p = 0; p < t.size(); ++p) {
      if (t.nodes()[p].is_terminal()) CHECK(depths[p] == 2);
    }
    CHECK(random_tree(InitMethod::kGrow, 0, 0, prims, rng).size() == 1);
  }
}

TEST_CASE("random_tree: depth bounds over many seeded draws") {
  const PrimitiveSet prims;
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const InitMethod m = i % 2 ? InitMethod::kGrow : InitMethod::kFull;
    const ExprTree t = random_tree(m, 2, 5, prims, rng);
    REQUIRE(t.depth() >= 2);
    REQUIRE(t.depth() <= 5);
  }
}

TEST_CASE("ramped half-and-half stays within the ramp and mixes methods") {
  const PrimitiveSet prims;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto pop = ramped_half_and_half(100, 2, 5, prims, rng);
    REQUIRE(pop.size() == 100);
    int full_shaped = 0;
    for (const ExprTree& t : pop) {
      CHECK(t.depth() >= 2);
      CHECK(t.depth() <= 5);
      if (t.size() == (1 << (t.depth() + 1)) - 1) ++full_shaped;
    }
    CHECK(full_shaped > 20);
    CHECK(full_shaped < 100);
  }
}

TEST_CASE("round trip over RHH trees") {
  const PrimitiveSet prims;
  Rng rng(3);
  const auto trees = ramped_half_and_half(10000, 2, 5, prims, rng);
  for (const ExprTree& t : trees) {
    const TokenSeq tokens = serialize_tokens(t);
    REQUIRE(static_cast<int>(tokens.size()) == t.size());
    REQUIRE(parse_prefix(std::span<const std::string>(tokens)) == t);
    REQUIRE(parse_text(to_text(t)) == t);
  }
}

TEST_CASE("subtree helpers") {
  const ExprTree t = parse_text("ADD MUL v1 v2 SUB v3 C+0.1");
  CHECK(t.subtree_end(1) == 4);
  CHECK(to_text(t.subtree(4)) == "SUB v3 C+0.1");
  CHECK(to_text(t.with_subtree(1, parse_text("v4"))) == "ADD v4 SUB v3 C+0.1");
  CHECK(t.variables_required() == 3);
  CHECK(parse_text("C+0.5").variables_required() == 0);
}

TEST_CASE("evaluate stays total on finite inputs") {
  const PrimitiveSet prims;
  Rng rng(5);
  Matrix x = Matrix::Random(50, 4);
  x(0, 0) = 0.0;
  for (const ExprTree& t : ramped_half_and_half(500, 2, 5, prims, rng)) {
    const Vector v = evaluate(t, x);
    CHECK(v.size() == 50);
    CHECK_FALSE(v.array().isNaN().any());
  }
}
