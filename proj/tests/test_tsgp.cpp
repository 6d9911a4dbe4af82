#include <doctest.h>

#include "test_util.hpp"
#include "tsgp/corpus.hpp"
#include "tsgp/search.hpp"

using namespace tsgp;
using tsgp::test::code_of;

namespace {

ModelParams random_model(std::uint64_t seed, double init_std = 0.02, int max_len = 100) {
  Hyperparams h;
  h.d_model = 16;
  h.n_heads = 2;
  h.n_encoder_layers = 1;
  h.n_decoder_layers = 1;
  h.ffn_dim = 32;
  h.max_len = max_len;
  h.init_std = init_std;
  return init_model(h, Vocabulary(4), seed);
}

int count_legal(const std::vector<bool>& mask) {
  int n = 0;
  for (bool b : mask) n += b;
  return n;
}

}  // namespace

TEST_CASE("mask: budget arithmetic") {
  const Vocabulary v(4);
  SamplerState s;
  s.advance(v.node(v.id_of("ADD")));
  s.advance(v.node(v.id_of("v1")));
  REQUIRE(s.need == 1);
  REQUIRE(s.emitted == 2);

  // Two tokens left: one slot and EOS.
  const auto tight = legal_mask(s, v, 4, 17);
  CHECK_FALSE(tight[Vocabulary::kEos]);
  CHECK_FALSE(tight[Vocabulary::kPad]);
  CHECK_FALSE(tight[Vocabulary::kBos]);
  for (int id = Vocabulary::kFirstOp; id < v.size(); ++id) CHECK(tight[id] == v.is_terminal(id));

  // (2 + 1) + (1 + 1) + 1 = 6 tokens are needed for one more operator.
  CHECK(legal_mask(s, v, 6, 17)[v.id_of("MUL")]);
  CHECK_FALSE(legal_mask(s, v, 5, 17)[v.id_of("MUL")]);

  s.advance(v.node(v.id_of("v2")));
  REQUIRE(s.need == 0);
  const auto done = legal_mask(s, v, 100, 17);
  CHECK(done[Vocabulary::kEos]);
  CHECK(count_legal(done) == 1);
}

TEST_CASE("mask: depth limit") {
  const Vocabulary v(4);
  SamplerState s;
  s.depth_stack = {17};
  const auto mask = legal_mask(s, v, 100, 17);
  for (int id = Vocabulary::kFirstOp; id < v.size(); ++id) CHECK(mask[id] == v.is_terminal(id));
  CHECK_FALSE(mask[Vocabulary::kEos]);

  s.depth_stack = {16};
  CHECK(legal_mask(s, v, 100, 17)[v.id_of("ADD")]);
}

TEST_CASE("state accounting: stack length equals need") {
  const PrimitiveSet prims;
  const Vocabulary v(4);
  Rng rng(2);
  for (const ExprTree& t : ramped_half_and_half(200, 2, 6, prims, rng)) {
    SamplerState s;
    const auto depths = t.node_depths();
    for (int i = 0; i < t.size(); ++i) {
      REQUIRE(s.need >= 1);
      REQUIRE(s.depth_stack.back() == depths[i]);
      const int before = s.need;
      s.advance(t.nodes()[i]);
      CHECK(s.need == before + (t.nodes()[i].is_op() ? 1 : -1));
      CHECK(static_cast<int>(s.depth_stack.size()) == s.need);
    }
    CHECK(s.need == 0);
  }
}

TEST_CASE("sampling from random weights always yields valid trees") {
  const PrimitiveSet prims;
  for (const double init_std : {0.02, 1.0}) {
    const ModelParams m = random_model(5, init_std);
    Rng rng(17);
    const auto parents = ramped_half_and_half(50, 2, 5, prims, rng);
    for (int i = 0; i < 5000; ++i) {
      const ExprTree child = sample_offspring(m, parents[i % 50], 0.1, rng);
      REQUIRE(child.size() >= 1);
      REQUIRE(child.size() <= 99);
      REQUIRE(child.depth() <= 17);
      REQUIRE(parse_prefix(std::span<const std::string>(serialize_tokens(child))) == child);
    }
  }
}

TEST_CASE("masked tokens are never sampled") {
  const ModelParams m = random_model(6, 1.0);
  Rng rng(3);
  const ExprTree parent = parse_text("ADD v1 MUL v2 v3");
  SampleOptions tight;
  tight.max_len = 8;
  tight.max_depth = 2;
  for (int i = 0; i < 2000; ++i) {
    const ExprTree child = sample_offspring(m, parent, 0.1, rng, tight);
    REQUIRE(child.size() <= 7);
    REQUIRE(child.depth() <= 2);
  }
  SampleOptions leaf;
  leaf.max_depth = 0;
  for (int i = 0; i < 200; ++i) REQUIRE(sample_offspring(m, parent, 0.1, rng, leaf).size() == 1);
}

TEST_CASE("sampling is deterministic and handles long parents") {
  const ModelParams m = random_model(7, 0.5, 20);
  const PrimitiveSet prims;
  Rng tree_rng(1);
  const ExprTree big = random_tree(InitMethod::kFull, 6, 6, prims, tree_rng);
  REQUIRE(big.size() > 20);
  Rng a(99), b(99);
  for (int i = 0; i < 20; ++i) {
    const ExprTree x = sample_offspring(m, big, 0.1, a);
    CHECK(x == sample_offspring(m, big, 0.1, b));
    CHECK(x.size() <= 19);
  }
  CHECK(code_of([&] { sample_offspring(m, big, -1.0, a); }) == ErrorCode::kPrecondition);
}

TEST_CASE("run_tsgp invariants") {
  const ModelParams m = random_model(8);
  Rng prng(4);
  const SplitData data = split_synthetic(gen_synthetic_problem(4, 60, 0.1, prng));
  SearchConfig cfg;
  cfg.pop_size = 20;
  cfg.generations = 5;
  int calls = 0;
  const auto observer = [&](int, std::span<const Individual> pop) {
    ++calls;
    CHECK(pop.size() == 20);
    for (const Individual& ind : pop) {
      CHECK(ind.tree.depth() <= 17);
      CHECK(ind.tree.size() <= 100);
    }
  };
  Rng rng(10);
  const RunTrace t = run_tsgp(m, data, cfg, rng, observer);
  CHECK(t.method == "tsgp");
  CHECK(calls == 6);
  REQUIRE(t.generations.size() == 6);
  for (std::size_t g = 1; g < t.generations.size(); ++g) {
    CHECK(t.generations[g].best_train_rmse <= t.generations[g - 1].best_train_rmse);
  }
  CHECK(t.variations.size() == 100);
  for (const VariationRecord& v : t.variations) {
    CHECK(v.generation >= 1);
    if (!v.structurally_different) CHECK(v.sd_test == 0.0);
  }

  cfg.threads = 3;
  Rng rng2(10);
  const RunTrace t3 = run_tsgp(m, data, cfg, rng2);
  CHECK(t3.best_expression == t.best_expression);
  CHECK(t3.best_test_rmse == t.best_test_rmse);

  SplitData narrow = data;
  narrow.x_train = data.x_train.leftCols(3);
  narrow.x_test = data.x_test.leftCols(3);
  Rng rng3(1);
  CHECK(code_of([&] { run_tsgp(m, narrow, cfg, rng3); }) == ErrorCode::kPrecondition);

  cfg.sd_desired = -0.1;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::kPrecondition);
}
