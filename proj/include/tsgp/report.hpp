#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsgp/run.hpp"
#include "tsgp/stats.hpp"
#include "tsgp/trainer.hpp"

namespace tsgp {

struct SeriesPoint {
  int generation = 0;
  Quartiles q;
};

inline constexpr const char* kSeriesMetrics[] = {"best_train_rmse", "best_size", "sd_test"};

/// Across-run summary of one method on one dataset.
struct MethodSummary {
  std::string method;
  std::string dataset;
  int runs = 0;
  Quartiles test_rmse;
  Quartiles size;
  /// Keyed by the names in kSeriesMetrics. The sd_test series pools the
  /// finite, structurally different variations of every run per generation
  /// and skips generations without any.
  std::map<std::string, std::vector<SeriesPoint>> series;
};

/// Throws kEmpty, kMixedMethods (different methods or datasets), or
/// kPrecondition when generation counts differ.
MethodSummary aggregate_runs(std::span<const RunTrace> traces);

struct PairwiseTest {
  std::string method_a;
  std::string method_b;
  std::string dataset;
  double p_value = 1.0;
  bool significant = false;
};

inline constexpr double kAlpha = 0.05;

/// Rank-sum tests on final test RMSE for every method pair of every dataset.
std::vector<PairwiseTest> pairwise_tests(std::span<const RunTrace> traces);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

void write_results_csv(const std::string& path, std::span<const RunTrace> traces);
void write_trace_csv(const std::string& path, std::span<const RunTrace> traces);
void write_variations_csv(const std::string& path, std::span<const RunTrace> traces);
/// One file for `metric` covering every summary.
void write_series_csv(const std::string& path, std::span<const MethodSummary> summaries,
                      const std::string& metric);
void write_stats_csv(const std::string& path, std::span<const PairwiseTest> tests);

/// Training curve: step,loss.
void write_curve_csv(const std::string& path, std::span<const LossPoint> curve);

}  // namespace tsgp
