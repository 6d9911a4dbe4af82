#pragma once

#include <vector>

#include "tsgp/expr.hpp"
#include "tsgp/run.hpp"

namespace tsgp {

/// One inflate step: ms * (sigmoid(positive) - sigmoid(negative)).
struct SlimBlock {
  double ms = 0.0;
  ExprTree positive;
  ExprTree negative;
};

/// Additive individual: base tree plus the blocks appended by inflate.
/// Semantics on the train and test inputs are cached and updated
/// incrementally by the operators.
struct SlimIndividual {
  ExprTree base;
  std::vector<SlimBlock> blocks;
  Vector train_semantics;
  Vector test_semantics;

  /// size(base) + sum of both block tree sizes.
  int size() const;
};

struct SlimConfig {
  int pop_size = 100;
  int generations = 50;
  int tournament_size = 5;
  double inflate_prob = 0.2;
  int init_depth_min = 2;
  int init_depth_max = 5;
  int block_depth_min = 1;
  int block_depth_max = 2;
  int threads = 1;
};

SlimIndividual make_slim_individual(ExprTree base, const SplitData& data);

/// Semantics of one block on `inputs`.
Vector slim_block_semantics(const SlimBlock& block, const Matrix& inputs);

/// Full re-evaluation, independent of the caches.
Vector slim_evaluate(const SlimIndividual& ind, const Matrix& inputs);

/// Appends `block` and updates the caches.
SlimIndividual inflate_with(const SlimIndividual& ind, SlimBlock block, const SplitData& data);

/// Appends a block with ms ~ U(0, 1) and two fresh GROW trees.
SlimIndividual inflate(const SlimIndividual& ind, const SlimConfig& config,
                       const PrimitiveSet& prims, const SplitData& data, Rng& rng);

/// Removes the block at `index` and subtracts its contribution.
SlimIndividual deflate_at(const SlimIndividual& ind, std::size_t index, const SplitData& data);

/// Removes one uniformly chosen block; individuals without blocks come back
/// unchanged and the base is never removed.
SlimIndividual deflate(const SlimIndividual& ind, const SplitData& data, Rng& rng);

RunTrace run_slim(const SlimConfig& config, const PrimitiveSet& prims, const SplitData& data,
                  Rng& rng);

}  // namespace tsgp
