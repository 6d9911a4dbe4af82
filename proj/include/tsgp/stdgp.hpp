#pragma once

#include <functional>
#include <span>

#include "tsgp/expr.hpp"
#include "tsgp/run.hpp"

namespace tsgp {

enum class SelectionKind { kTournament, kDoubleTournament };

struct GPConfig {
  int pop_size = 100;
  int generations = 50;
  int tournament_size = 5;
  double crossover_prob = 0.9;
  double mutation_prob = 0.1;
  /// Probability of picking a terminal as crossover point.
  double terminal_bias = 0.1;
  int max_depth = 17;
  int init_depth_min = 2;
  int init_depth_max = 5;
  int mutation_depth_min = 0;
  int mutation_depth_max = 2;
  SelectionKind selection = SelectionKind::kTournament;
  /// Double tournament only.
  int fitness_size = 5;
  double parsimony_prob = 0.7;
  /// Harvest runs skip the per-variation test-set bookkeeping.
  bool log_variations = true;
  int threads = 1;

  /// Throws kPrecondition on out-of-range probabilities or sizes.
  void validate() const;
};

struct Individual {
  ExprTree tree;
  /// Training RMSE; +inf for overflowing expressions.
  double fitness = 0.0;
};

/// k uniform draws with replacement; minimal fitness wins, earliest draw on ties.
const Individual& tournament_select(std::span<const Individual> pop, int k, Rng& rng);

/// Two fitness tournaments produce two finalists; the smaller one (by node
/// count) wins with probability parsimony_prob. Equal sizes keep the first.
const Individual& double_tournament_select(std::span<const Individual> pop, int fitness_size,
                                           double parsimony_prob, Rng& rng);

/// Grafts a subtree of p2 into p1. Crossover points are terminals with
/// probability terminal_bias and internal nodes otherwise. Offspring deeper
/// than max_depth are replaced by a copy of p1.
ExprTree subtree_crossover(const ExprTree& p1, const ExprTree& p2, double terminal_bias,
                           int max_depth, Rng& rng);

/// Replaces a uniformly chosen subtree with a FULL tree of depth drawn from
/// [depth_min, depth_max]; same depth guard as crossover.
ExprTree subtree_mutation(const ExprTree& p, const PrimitiveSet& prims, int depth_min,
                          int depth_max, int max_depth, Rng& rng);

/// Training fitness for every tree, evaluated data-parallel.
std::vector<Individual> evaluate_population(std::vector<ExprTree> trees, const Matrix& x,
                                            const Vector& y, int threads);

/// Called once per generation (0 = initial population) with the evaluated
/// population.
using GenerationObserver = std::function<void(int, std::span<const Individual>)>;

RunTrace run_stdgp(const GPConfig& config, const PrimitiveSet& prims, const SplitData& data,
                   Rng& rng, const GenerationObserver& observer = {});

/// Shared by every search loop: the variation-log entry for one parent and
/// offspring pair, measured on the test inputs.
VariationRecord make_variation_record(int generation, const ExprTree& parent,
                                      const ExprTree& offspring, const Matrix& x_test);

}  // namespace tsgp
