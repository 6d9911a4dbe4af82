#include "tsgp/semantics.hpp"

#include <cmath>
#include <limits>

#include "tsgp/error.hpp"

namespace tsgp {

SemanticVector SemanticVector::from(Vector v) {
  const bool finite = v.allFinite();
  return {std::move(v), finite};
}

Matrix sample_standard_inputs(int m_sem, int d, Rng& rng) {
  if (m_sem < 2) throw Error(ErrorCode::kPrecondition, "semantic sample needs at least 2 points");
  if (d < 1) throw Error(ErrorCode::kPrecondition, "need at least one feature");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(m_sem, d);
  // Row-major fill so that growing d keeps earlier draws per row stable.
  for (int i = 0; i < m_sem; ++i) {
    for (int j = 0; j < d; ++j) out(i, j) = normal(rng);
  }
  return out;
}

SemanticVector semantics_of(const ExprTree& tree, const Matrix& points) {
  return SemanticVector::from(evaluate(tree, points));
}

double semantic_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "semantic vector has non-finite entries");
  }
  return (a - b).norm();
}

double semantic_distance(const SemanticVector& a, const SemanticVector& b) {
  return semantic_distance(a.values, b.values);
}

double rmse(const Vector& y, const Vector& yhat) {
  if (y.size() != yhat.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(y.size()) + " vs " + std::to_string(yhat.size()));
  }
  if (y.size() == 0) throw Error(ErrorCode::kPrecondition, "rmse of empty vectors");
  if (!yhat.allFinite()) return std::numeric_limits<double>::infinity();
  const double r = (y - yhat).norm() / std::sqrt(static_cast<double>(y.size()));
  return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

Standardized standardize(const Matrix& data, const StandardizationParams* params) {
  Standardized out;
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (params == nullptr) {
    if (n < 1) throw Error(ErrorCode::kPrecondition, "cannot standardize an empty matrix");
    out.params.mean.resize(d);
    out.params.stddev.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double mean = data.col(j).mean();
      const double var = (data.col(j).array() - mean).square().sum() / static_cast<double>(n);
      const double sd = std::sqrt(var);
      // Relative threshold: a column of identical values can still leave
      // rounding noise in the variance.
      if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw Error(ErrorCode::kConstantColumn, "column " + std::to_string(j) + " is constant");
      }
      out.params.mean[j] = mean;
      out.params.stddev[j] = sd;
    }
  } else {
    if (static_cast<Eigen::Index>(params->mean.size()) != d ||
        static_cast<Eigen::Index>(params->stddev.size()) != d) {
      throw Error(ErrorCode::kLengthMismatch, "standardization params do not match column count");
    }
    out.params = *params;
  }
  out.data.resize(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    out.data.col(j) = (data.col(j).array() - out.params.mean[j]) / out.params.stddev[j];
  }
  return out;
}

}  // namespace tsgp
