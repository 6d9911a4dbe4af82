#pragma once

#include <string>
#include <vector>

#include "tsgp/dataset.hpp"
#include "tsgp/report.hpp"
#include "tsgp/search.hpp"
#include "tsgp/slim.hpp"
#include "tsgp/stdgp.hpp"

namespace tsgp {

struct BenchConfig {
  std::vector<std::string> methods{"tsgp", "stdgp", "slim"};
  int runs = 30;
  std::uint64_t seed = 0;
  GPConfig gp;
  SlimConfig slim;
  SearchConfig search;
  /// Workers across runs; each run itself is single-threaded.
  int threads = 1;
};

struct BenchResult {
  std::string dataset;
  std::vector<RunTrace> traces;
  std::vector<MethodSummary> summaries;
  std::vector<PairwiseTest> tests;
};

/// Seed of run r; also the trace seed.
std::uint64_t run_seed(std::uint64_t base, int run);

/// Runs every method on the same per-run split. `model` is required when
/// the method list contains tsgp.
BenchResult run_bench(const Dataset& ds, const BenchConfig& config,
                      const ModelParams* model = nullptr);

/// Single run of `method` with the split and stream layout used by run_bench.
RunTrace run_method(const std::string& method, const Dataset& ds, const BenchConfig& config,
                    const ModelParams* model, int run);

/// results.csv, trace.csv, variations.csv, series_<metric>.csv and
/// stats.csv covering every dataset in `results`. Returns the file paths.
std::vector<std::string> write_bench_outputs(const std::string& dir,
                                             std::span<const BenchResult> results);

/// Parent-to-offspring semantic distances on `inputs` for the transformer
/// and for stdGP subtree mutation applied to the same parents.
struct StepProbe {
  std::vector<double> tsgp;
  std::vector<double> mutation;
  double median_tsgp = 0.0;
  double median_mutation = 0.0;
  double p_value = 1.0;
};

/// Keeps structurally different, finite variations only.
StepProbe semantic_step_probe(const ModelParams& model, std::span<const ExprTree> parents,
                              const Matrix& inputs, const SearchConfig& search,
                              const GPConfig& gp, std::uint64_t seed);

}  // namespace tsgp
