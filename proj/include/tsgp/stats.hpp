#pragma once

#include <span>

namespace tsgp {

/// Midpoint of the two central values for even counts. Throws kEmpty.
double median(std::span<const double> values);
/// Linear interpolation between order statistics at position p*(n-1).
double quantile(std::span<const double> values, double p);

struct Quartiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};
Quartiles quartiles(std::span<const double> values);

/// Two-sided Wilcoxon rank-sum p-value. Uses the exact null distribution
/// when |a|+|b| <= kExactLimit and there are no ties, the normal
/// approximation otherwise.
double wilcoxon_ranksum(std::span<const double> a, std::span<const double> b);

inline constexpr int kExactLimit = 16;

/// Exact null distribution of the rank sum of a; requires untied samples
/// and |a|+|b| <= 40 (kPrecondition otherwise).
double wilcoxon_exact(std::span<const double> a, std::span<const double> b);
/// Normal approximation with tie and continuity corrections.
double wilcoxon_normal(std::span<const double> a, std::span<const double> b);

}  // namespace tsgp
