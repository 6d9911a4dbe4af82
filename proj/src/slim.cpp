#include "tsgp/slim.hpp"

#include <limits>

#include "tsgp/parallel.hpp"
#include "tsgp/semantics.hpp"
#include "tsgp/stdgp.hpp"

namespace tsgp {

namespace {

Vector sigmoid(const Vector& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); }

Vector semantics_or_empty(const ExprTree& tree, const Matrix& inputs) {
  if (inputs.rows() == 0) return Vector();
  return evaluate(tree, inputs);
}

Vector block_or_empty(const SlimBlock& block, const Matrix& inputs) {
  if (inputs.rows() == 0) return Vector();
  return slim_block_semantics(block, inputs);
}

double fitness_of(const SlimIndividual& ind, const SplitData& data) {
  return rmse(data.y_train, ind.train_semantics);
}

}  // namespace

int SlimIndividual::size() const {
  int s = base.size();
  for (const auto& b : blocks) s += b.positive.size() + b.negative.size();
  return s;
}

SlimIndividual make_slim_individual(ExprTree base, const SplitData& data) {
  SlimIndividual ind;
  ind.train_semantics = semantics_or_empty(base, data.x_train);
  ind.test_semantics = semantics_or_empty(base, data.x_test);
  ind.base = std::move(base);
  return ind;
}

Vector slim_block_semantics(const SlimBlock& block, const Matrix& inputs) {
  return block.ms *
         (sigmoid(evaluate(block.positive, inputs)) - sigmoid(evaluate(block.negative, inputs)));
}

Vector slim_evaluate(const SlimIndividual& ind, const Matrix& inputs) {
  Vector out = evaluate(ind.base, inputs);
  for (const auto& b : ind.blocks) out += slim_block_semantics(b, inputs);
  return out;
}

SlimIndividual inflate_with(const SlimIndividual& ind, SlimBlock block, const SplitData& data) {
  SlimIndividual out = ind;
  if (data.x_train.rows() > 0) out.train_semantics += block_or_empty(block, data.x_train);
  if (data.x_test.rows() > 0) out.test_semantics += block_or_empty(block, data.x_test);
  out.blocks.push_back(std::move(block));
  return out;
}

SlimIndividual inflate(const SlimIndividual& ind, const SlimConfig& config,
                       const PrimitiveSet& prims, const SplitData& data, Rng& rng) {
  SlimBlock block;
  block.ms = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  block.positive =
      random_tree(InitMethod::kGrow, config.block_depth_min, config.block_depth_max, prims, rng);
  block.negative =
      random_tree(InitMethod::kGrow, config.block_depth_min, config.block_depth_max, prims, rng);
  return inflate_with(ind, std::move(block), data);
}

SlimIndividual deflate_at(const SlimIndividual& ind, std::size_t index, const SplitData& data) {
  SlimIndividual out = ind;
  const SlimBlock& block = ind.blocks.at(index);
  if (data.x_train.rows() > 0) out.train_semantics -= block_or_empty(block, data.x_train);
  if (data.x_test.rows() > 0) out.test_semantics -= block_or_empty(block, data.x_test);
  out.blocks.erase(out.blocks.begin() + static_cast<std::ptrdiff_t>(index));
  return out;
}

SlimIndividual deflate(const SlimIndividual& ind, const SplitData& data, Rng& rng) {
  if (ind.blocks.empty()) return ind;
  const auto index = std::uniform_int_distribution<std::size_t>(0, ind.blocks.size() - 1)(rng);
  return deflate_at(ind, index, data);
}

RunTrace run_slim(const SlimConfig& config, const PrimitiveSet& prims, const SplitData& data,
                  Rng& rng) {
  RunTrace trace;
  trace.method = "slim";

  struct Scored {
    SlimIndividual ind;
    double fitness = 0.0;
  };
  auto score_all = [&](std::vector<SlimIndividual> inds) {
    std::vector<Scored> out(inds.size());
    parallel_for(inds.size(), config.threads, [&](std::size_t i) {
      out[i].fitness = fitness_of(inds[i], data);
      out[i].ind = std::move(inds[i]);
    });
    return out;
  };

  std::vector<SlimIndividual> init;
  init.reserve(config.pop_size);
  for (auto& t : ramped_half_and_half(config.pop_size, config.init_depth_min,
                                      config.init_depth_max, prims, rng)) {
    init.push_back(make_slim_individual(std::move(t), data));
  }
  std::vector<Scored> pop = score_all(std::move(init));

  Scored best = pop.front();
  auto record = [&](int gen) {
    for (const Scored& s : pop) {
      if (s.fitness < best.fitness) best = s;
    }
    trace.generations.push_back({gen, best.fitness, best.ind.size()});
  };
  record(0);

  auto select = [&]() -> const Scored& {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    const Scored* winner = &pop[pick(rng)];
    for (int i = 1; i < config.tournament_size; ++i) {
      const Scored* c = &pop[pick(rng)];
      if (c->fitness < winner->fitness) winner = c;
    }
    return *winner;
  };

  std::bernoulli_distribution do_inflate(config.inflate_prob);
  for (int gen = 1; gen <= config.generations; ++gen) {
    std::vector<SlimIndividual> children;
    children.reserve(config.pop_size);
    for (int i = 0; i < config.pop_size; ++i) {
      const SlimIndividual& parent = select().ind;
      SlimIndividual child = do_inflate(rng) ? inflate(parent, config, prims, data, rng)
                                             : deflate(parent, data, rng);
      VariationRecord rec;
      rec.generation = gen;
      rec.parent_size = parent.size();
      rec.offspring_size = child.size();
      rec.structurally_different = child.blocks.size() != parent.blocks.size();
      rec.sd_test = parent.test_semantics.allFinite() && child.test_semantics.allFinite()
                        ? semantic_distance(parent.test_semantics, child.test_semantics)
                        : std::numeric_limits<double>::infinity();
      trace.variations.push_back(rec);
      children.push_back(std::move(child));
    }
    pop = score_all(std::move(children));
    record(gen);
  }

  trace.best_size = best.ind.size();
  trace.best_expression = to_text(best.ind.base) + " +" + std::to_string(best.ind.blocks.size()) +
                          " blocks";
  trace.best_test_rmse = data.x_test.rows() > 0
                             ? rmse(data.y_test, best.ind.test_semantics)
                             : best.fitness;
  return trace;
}

}  // namespace tsgp
