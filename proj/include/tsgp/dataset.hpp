#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsgp/run.hpp"
#include "tsgp/semantics.hpp"

namespace tsgp {

/// Standardized regression data. `params` holds the feature columns
/// followed by the target.
struct Dataset {
  std::string name;
  std::vector<std::string> feature_names;
  Matrix x;
  Vector y;
  StandardizationParams params;

  int d() const { return static_cast<int>(x.cols()); }
  int m() const { return static_cast<int>(x.rows()); }
};

inline constexpr int kMinRows = 20;

/// Standardizes features and target jointly fitted on all rows.
Dataset make_dataset(std::string name, std::vector<std::string> feature_names, const Matrix& x,
                     const Vector& y);

/// Header row plus numeric cells; tab separated when the header contains a
/// tab, comma separated otherwise. Features are the non-target columns in
/// header order. Throws kMissingTarget, kNonNumericCell, kTooFewRows,
/// kConstantColumn or kIo.
Dataset load_csv(const std::string& path, const std::string& target_column,
                 const std::string& name = "");

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

/// Seeded shuffle; the train half gets the extra row for odd m.
SplitIndices split_indices(int m, std::uint64_t seed);
SplitData apply_split(const Dataset& ds, const SplitIndices& split);

}  // namespace tsgp
