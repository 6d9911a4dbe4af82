#include "tsgp/stdgp.hpp"

#include <limits>

#include "tsgp/error.hpp"
#include "tsgp/parallel.hpp"
#include "tsgp/semantics.hpp"

namespace tsgp {

void GPConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (pop_size < 1 || generations < 0 || tournament_size < 1 || fitness_size < 1) {
    throw Error(ErrorCode::kPrecondition, "population, generation and tournament sizes");
  }
  if (!prob(crossover_prob) || !prob(mutation_prob) || crossover_prob + mutation_prob > 1.0 + 1e-12) {
    throw Error(ErrorCode::kPrecondition, "crossover_prob + mutation_prob must lie in [0, 1]");
  }
  if (!prob(terminal_bias)) throw Error(ErrorCode::kPrecondition, "terminal_bias outside [0, 1]");
  if (parsimony_prob < 0.5 || parsimony_prob > 1.0) {
    throw Error(ErrorCode::kPrecondition, "parsimony_prob outside [0.5, 1]");
  }
  if (init_depth_min < 0 || init_depth_min > init_depth_max || init_depth_max > max_depth) {
    throw Error(ErrorCode::kPrecondition, "initial depth range");
  }
}

const Individual& tournament_select(std::span<const Individual> pop, int k, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
  const Individual* best = &pop[pick(rng)];
  for (int i = 1; i < k; ++i) {
    const Individual* c = &pop[pick(rng)];
    if (c->fitness < best->fitness) best = c;
  }
  return *best;
}

const Individual& double_tournament_select(std::span<const Individual> pop, int fitness_size,
                                           double parsimony_prob, Rng& rng) {
  const Individual& first = tournament_select(pop, fitness_size, rng);
  const Individual& second = tournament_select(pop, fitness_size, rng);
  const bool pick_smaller = std::bernoulli_distribution(parsimony_prob)(rng);
  const int s1 = first.tree.size();
  const int s2 = second.tree.size();
  if (s1 == s2) return first;
  const Individual& smaller = s1 < s2 ? first : second;
  const Individual& larger = s1 < s2 ? second : first;
  return pick_smaller ? smaller : larger;
}

namespace {

int pick_crossover_point(const ExprTree& t, double terminal_bias, Rng& rng) {
  std::vector<int> terminals;
  std::vector<int> internals;
  const auto nodes = t.nodes();
  for (int i = 0; i < t.size(); ++i) {
    (nodes[i].is_op() ? internals : terminals).push_back(i);
  }
  const bool want_terminal = std::bernoulli_distribution(terminal_bias)(rng);
  const std::vector<int>& pool =
      internals.empty() ? terminals : (terminals.empty() || !want_terminal ? internals : terminals);
  return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
}

}  // namespace

ExprTree subtree_crossover(const ExprTree& p1, const ExprTree& p2, double terminal_bias,
                           int max_depth, Rng& rng) {
  const int at1 = pick_crossover_point(p1, terminal_bias, rng);
  const int at2 = pick_crossover_point(p2, terminal_bias, rng);
  ExprTree child = p1.with_subtree(at1, p2.subtree(at2));
  if (child.depth() > max_depth) return p1;
  return child;
}

ExprTree subtree_mutation(const ExprTree& p, const PrimitiveSet& prims, int depth_min,
                          int depth_max, int max_depth, Rng& rng) {
  const int at = std::uniform_int_distribution<int>(0, p.size() - 1)(rng);
  const ExprTree fresh = random_tree(InitMethod::kFull, depth_min, depth_max, prims, rng);
  ExprTree child = p.with_subtree(at, fresh);
  if (child.depth() > max_depth) return p;
  return child;
}

std::vector<Individual> evaluate_population(std::vector<ExprTree> trees, const Matrix& x,
                                            const Vector& y, int threads) {
  std::vector<Individual> pop(trees.size());
  parallel_for(trees.size(), threads, [&](std::size_t i) {
    pop[i].fitness = rmse(y, evaluate(trees[i], x));
    pop[i].tree = std::move(trees[i]);
  });
  return pop;
}

VariationRecord make_variation_record(int generation, const ExprTree& parent,
                                      const ExprTree& offspring, const Matrix& x_test) {
  VariationRecord rec;
  rec.generation = generation;
  rec.parent_size = parent.size();
  rec.offspring_size = offspring.size();
  rec.structurally_different = !(parent == offspring);
  const Vector a = evaluate(parent, x_test);
  const Vector b = evaluate(offspring, x_test);
  rec.sd_test = (a.allFinite() && b.allFinite()) ? semantic_distance(a, b)
                                                  : std::numeric_limits<double>::infinity();
  return rec;
}

RunTrace run_stdgp(const GPConfig& config, const PrimitiveSet& prims, const SplitData& data,
                   Rng& rng, const GenerationObserver& observer) {
  config.validate();
  RunTrace trace;
  trace.method = "stdgp";

  auto select = [&](std::span<const Individual> pop) -> const Individual& {
    if (config.selection == SelectionKind::kDoubleTournament) {
      return double_tournament_select(pop, config.fitness_size, config.parsimony_prob, rng);
    }
    return tournament_select(pop, config.tournament_size, rng);
  };

  std::vector<Individual> pop = evaluate_population(
      ramped_half_and_half(config.pop_size, config.init_depth_min, config.init_depth_max, prims,
                           rng),
      data.x_train, data.y_train, config.threads);

  Individual best = pop.front();
  auto record = [&](int gen) {
    for (const Individual& ind : pop) {
      if (ind.fitness < best.fitness) best = ind;
    }
    trace.generations.push_back({gen, best.fitness, best.tree.size()});
    if (observer) observer(gen, pop);
  };
  record(0);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int gen = 1; gen <= config.generations; ++gen) {
    std::vector<ExprTree> children;
    children.reserve(config.pop_size);
    for (int i = 0; i < config.pop_size; ++i) {
      const double r = unit(rng);
      if (r < config.crossover_prob) {
        const Individual& p1 = select(pop);
        const Individual& p2 = select(pop);
        children.push_back(
            subtree_crossover(p1.tree, p2.tree, config.terminal_bias, config.max_depth, rng));
        if (config.log_variations) {
          trace.variations.push_back(
              make_variation_record(gen, p1.tree, children.back(), data.x_test));
        }
      } else if (r < config.crossover_prob + config.mutation_prob) {
        const Individual& p = select(pop);
        children.push_back(subtree_mutation(p.tree, prims, config.mutation_depth_min,
                                            config.mutation_depth_max, config.max_depth, rng));
        if (config.log_variations) {
          trace.variations.push_back(
              make_variation_record(gen, p.tree, children.back(), data.x_test));
        }
      } else {
        children.push_back(select(pop).tree);
      }
    }
    pop = evaluate_population(std::move(children), data.x_train, data.y_train, config.threads);
    record(gen);
  }

  trace.best_size = best.tree.size();
  trace.best_expression = to_text(best.tree);
  trace.best_test_rmse =
      data.x_test.rows() > 0 ? rmse(data.y_test, evaluate(best.tree, data.x_test)) : best.fitness;
  return trace;
}

}  // namespace tsgp
