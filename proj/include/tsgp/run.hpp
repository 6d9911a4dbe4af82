#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsgp/expr.hpp"

namespace tsgp {

/// Standardized data already partitioned into train and test rows.
struct SplitData {
  Matrix x_train;
  Vector y_train;
  Matrix x_test;
  Vector y_test;
};

struct GenerationRecord {
  int generation = 0;
  /// Best-so-far (hall of fame) training RMSE.
  double best_train_rmse = 0.0;
  int best_size = 0;
};

/// One parent -> offspring application of a variation operator.
struct VariationRecord {
  int generation = 0;
  int parent_size = 0;
  int offspring_size = 0;
  /// Semantic distance on the test inputs; +inf if either side overflowed.
  double sd_test = 0.0;
  bool structurally_different = false;
};

/// Method-agnostic log of one run. `generations` holds the initial
/// population (generation 0) followed by one record per evolved generation.
struct RunTrace {
  std::string method;
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<GenerationRecord> generations;
  double best_test_rmse = 0.0;
  int best_size = 0;
  std::string best_expression;
  std::vector<VariationRecord> variations;
};

}  // namespace tsgp
