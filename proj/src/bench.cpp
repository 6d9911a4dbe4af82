#include "tsgp/bench.hpp"

#include <filesystem>

#include "tsgp/error.hpp"
#include "tsgp/parallel.hpp"

namespace tsgp {

std::uint64_t run_seed(std::uint64_t base, int run) {
  return derive_seed(base, static_cast<std::uint64_t>(run));
}

namespace {

std::uint64_t method_stream(const std::string& method) {
  if (method == "stdgp") return 1;
  if (method == "slim") return 2;
  if (method == "tsgp") return 3;
  throw Error(ErrorCode::kPrecondition, "unknown method '" + method + "'");
}

}  // namespace

RunTrace run_method(const std::string& method, const Dataset& ds, const BenchConfig& config,
                    const ModelParams* model, int run) {
  const std::uint64_t seed = run_seed(config.seed, run);
  const SplitData data = apply_split(ds, split_indices(ds.m(), derive_seed(seed, 0)));
  Rng rng(derive_seed(seed, method_stream(method)));
  const PrimitiveSet prims{ds.d()};
  RunTrace trace;
  if (method == "stdgp") {
    GPConfig gp = config.gp;
    gp.threads = 1;
    trace = run_stdgp(gp, prims, data, rng);
  } else if (method == "slim") {
    SlimConfig slim = config.slim;
    slim.threads = 1;
    trace = run_slim(slim, prims, data, rng);
  } else {
    if (model == nullptr) throw Error(ErrorCode::kPrecondition, "tsgp needs a model");
    SearchConfig search = config.search;
    search.threads = 1;
    trace = run_tsgp(*model, data, search, rng);
  }
  trace.seed = seed;
  trace.dataset = ds.name;
  return trace;
}

BenchResult run_bench(const Dataset& ds, const BenchConfig& config, const ModelParams* model) {
  if (config.runs < 1 || config.methods.empty()) {
    throw Error(ErrorCode::kPrecondition, "bench needs at least one run and one method");
  }
  for (const auto& m : config.methods) method_stream(m);

  const std::size_t n_methods = config.methods.size();
  std::vector<RunTrace> traces(n_methods * config.runs);
  parallel_for(traces.size(), config.threads, [&](std::size_t i) {
    traces[i] = run_method(config.methods[i / config.runs], ds, config, model,
                           static_cast<int>(i % config.runs));
  });

  BenchResult result;
  result.dataset = ds.name;
  for (std::size_t m = 0; m < n_methods; ++m) {
    std::span<const RunTrace> runs(traces.data() + m * config.runs, config.runs);
    result.summaries.push_back(aggregate_runs(runs));
  }
  result.tests = pairwise_tests(traces);
  result.traces = std::move(traces);
  return result;
}

std::vector<std::string> write_bench_outputs(const std::string& dir,
                                             std::span<const BenchResult> results) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<RunTrace> traces;
  std::vector<MethodSummary> summaries;
  std::vector<PairwiseTest> tests;
  for (const BenchResult& r : results) {
    traces.insert(traces.end(), r.traces.begin(), r.traces.end());
    summaries.insert(summaries.end(), r.summaries.begin(), r.summaries.end());
    tests.insert(tests.end(), r.tests.begin(), r.tests.end());
  }
  std::vector<std::string> written;
  const auto at = [&](const std::string& f) {
    written.push_back((fs::path(dir) / f).string());
    return written.back();
  };
  write_results_csv(at("results.csv"), traces);
  write_trace_csv(at("trace.csv"), traces);
  write_variations_csv(at("variations.csv"), traces);
  for (const char* metric : kSeriesMetrics) {
    write_series_csv(at(std::string("series_") + metric + ".csv"), summaries, metric);
  }
  write_stats_csv(at("stats.csv"), tests);
  return written;
}

StepProbe semantic_step_probe(const ModelParams& model, std::span<const ExprTree> parents,
                              const Matrix& inputs, const SearchConfig& search,
                              const GPConfig& gp, std::uint64_t seed) {
  const PrimitiveSet prims{model.vocab.n_vars()};
  Rng tsgp_rng(derive_seed(seed, 0));
  Rng mut_rng(derive_seed(seed, 1));
  StepProbe probe;
  for (const ExprTree& parent : parents) {
    const ExprTree a = transformer_variation(model, parent, search, tsgp_rng);
    const VariationRecord ra = make_variation_record(0, parent, a, inputs);
    if (ra.structurally_different && std::isfinite(ra.sd_test)) probe.tsgp.push_back(ra.sd_test);

    const ExprTree b = subtree_mutation(parent, prims, gp.mutation_depth_min,
                                       gp.mutation_depth_max, gp.max_depth, mut_rng);
    const VariationRecord rb = make_variation_record(0, parent, b, inputs);
    if (rb.structurally_different && std::isfinite(rb.sd_test)) {
      probe.mutation.push_back(rb.sd_test);
    }
  }
  if (!probe.tsgp.empty()) probe.median_tsgp = median(probe.tsgp);
  if (!probe.mutation.empty()) probe.median_mutation = median(probe.mutation);
  if (!probe.tsgp.empty() && !probe.mutation.empty()) {
    probe.p_value = wilcoxon_ranksum(probe.tsgp, probe.mutation);
  }
  return probe;
}

}  // namespace tsgp
