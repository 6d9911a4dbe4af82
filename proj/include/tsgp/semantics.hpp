#pragma once

#include <vector>

#include "tsgp/expr.hpp"

namespace tsgp {

/// Output vector of a function on a fixed input sample.
struct SemanticVector {
  Vector values;
  bool finite = true;

  static SemanticVector from(Vector v);
};

/// Per-column mean and population standard deviation.
struct StandardizationParams {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// m_sem x d matrix of independent standard-normal draws. m_sem >= 2.
Matrix sample_standard_inputs(int m_sem, int d, Rng& rng);

SemanticVector semantics_of(const ExprTree& tree, const Matrix& points);

/// Euclidean distance; throws kLengthMismatch or kNonFinite.
double semantic_distance(const SemanticVector& a, const SemanticVector& b);
double semantic_distance(const Vector& a, const Vector& b);

/// ||y - yhat|| / sqrt(m). +inf whenever yhat has a non-finite entry.
double rmse(const Vector& y, const Vector& yhat);

struct Standardized {
  Matrix data;
  StandardizationParams params;
};

/// Fits per-column parameters (population std) when `params` is null,
/// otherwise applies the given ones. Throws kConstantColumn.
Standardized standardize(const Matrix& data, const StandardizationParams* params = nullptr);

}  // namespace tsgp
