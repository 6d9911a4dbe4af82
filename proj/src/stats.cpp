#include "tsgp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tsgp/error.hpp"

namespace tsgp {

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::kEmpty, "quantile of no values");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kPrecondition, "quantile p outside [0,1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kEmpty, "median of no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Quartiles quartiles(std::span<const double> values) {
  return {quantile(values, 0.25), median(values), quantile(values, 0.75)};
}

namespace {

struct Ranked {
  double rank_sum_a = 0.0;
  double tie_term = 0.0;  // sum of t^3 - t over tie groups
  bool ties = false;
};

Ranked rank(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<std::pair<double, bool>> all;
  all.reserve(n);
  for (double x : a) all.emplace_back(x, true);
  for (double x : b) all.emplace_back(x, false);
  std::sort(all.begin(), all.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  Ranked out;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && all[j].first == all[i].first) ++j;
    const double t = static_cast<double>(j - i);
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second) out.rank_sum_a += midrank;
    }
    if (t > 1) {
      out.ties = true;
      out.tie_term += t * t * t - t;
    }
    i = j;
  }
  return out;
}

void check_sizes(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmpty, "rank-sum test needs two samples");
  for (double x : a) {
    if (std::isnan(x)) throw Error(ErrorCode::kNonFinite, "NaN sample");
  }
  for (double x : b) {
    if (std::isnan(x)) throw Error(ErrorCode::kNonFinite, "NaN sample");
  }
}

}  // namespace

double wilcoxon_exact(std::span<const double> a, std::span<const double> b) {
  check_sizes(a, b);
  const int n1 = static_cast<int>(a.size());
  const int n = n1 + static_cast<int>(b.size());
  if (n > 40) throw Error(ErrorCode::kPrecondition, "exact rank-sum limited to 40 samples");
  const Ranked r = rank(a, b);
  if (r.ties) throw Error(ErrorCode::kPrecondition, "exact rank-sum requires untied samples");

  // count[k][s]: subsets of {1..i} with k elements summing to s.
  const int max_sum = n * (n + 1) / 2;
  std::vector<std::vector<double>> count(n1 + 1, std::vector<double>(max_sum + 1, 0.0));
  count[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    for (int k = std::min(i, n1); k >= 1; --k) {
      for (int s = max_sum; s >= i; --s) count[k][s] += count[k - 1][s - i];
    }
  }
  const auto w = static_cast<int>(std::lround(r.rank_sum_a));
  double total = 0.0, below = 0.0, above = 0.0;
  for (int s = 0; s <= max_sum; ++s) {
    total += count[n1][s];
    if (s <= w) below += count[n1][s];
    if (s >= w) above += count[n1][s];
  }
  return std::min(1.0, 2.0 * std::min(below, above) / total);
}

double wilcoxon_normal(std::span<const double> a, std::span<const double> b) {
  check_sizes(a, b);
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  const Ranked r = rank(a, b);
  const double mu = n1 * (n + 1.0) / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - r.tie_term / (n * (n - 1.0)));
  const double dev = std::abs(r.rank_sum_a - mu);
  if (var <= 0.0 || dev < 0.5) return 1.0;
  const double z = (dev - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

double wilcoxon_ranksum(std::span<const double> a, std::span<const double> b) {
  check_sizes(a, b);
  if (a.size() + b.size() <= static_cast<std::size_t>(kExactLimit) && !rank(a, b).ties) {
    return wilcoxon_exact(a, b);
  }
  return wilcoxon_normal(a, b);
}

}  // namespace tsgp
