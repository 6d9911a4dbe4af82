#include "tsgp/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "tsgp/error.hpp"

namespace tsgp {

MethodSummary aggregate_runs(std::span<const RunTrace> traces) {
  if (traces.empty()) throw Error(ErrorCode::kEmpty, "no runs to aggregate");
  const std::string& method = traces.front().method;
  const std::string& dataset = traces.front().dataset;
  const std::size_t gens = traces.front().generations.size();
  for (const RunTrace& t : traces) {
    if (t.method != method) {
      throw Error(ErrorCode::kMixedMethods, "runs of '" + method + "' and '" + t.method + "'");
    }
    if (t.dataset != dataset) {
      throw Error(ErrorCode::kMixedMethods, "runs on '" + dataset + "' and '" + t.dataset + "'");
    }
    if (t.generations.size() != gens) {
      throw Error(ErrorCode::kPrecondition, "runs record different generation counts");
    }
  }

  MethodSummary s;
  s.method = method;
  s.dataset = dataset;
  s.runs = static_cast<int>(traces.size());
  std::vector<double> test, size;
  for (const RunTrace& t : traces) {
    test.push_back(t.best_test_rmse);
    size.push_back(t.best_size);
  }
  s.test_rmse = quartiles(test);
  s.size = quartiles(size);

  auto& rmse_series = s.series["best_train_rmse"];
  auto& size_series = s.series["best_size"];
  for (std::size_t g = 0; g < gens; ++g) {
    std::vector<double> r, z;
    for (const RunTrace& t : traces) {
      r.push_back(t.generations[g].best_train_rmse);
      z.push_back(t.generations[g].best_size);
    }
    const int gen = traces.front().generations[g].generation;
    rmse_series.push_back({gen, quartiles(r)});
    size_series.push_back({gen, quartiles(z)});
  }

  std::map<int, std::vector<double>> pooled;
  for (const RunTrace& t : traces) {
    for (const VariationRecord& v : t.variations) {
      if (v.structurally_different && std::isfinite(v.sd_test)) {
        pooled[v.generation].push_back(v.sd_test);
      }
    }
  }
  auto& sd_series = s.series["sd_test"];
  for (const auto& [gen, values] : pooled) sd_series.push_back({gen, quartiles(values)});
  return s;
}

std::vector<PairwiseTest> pairwise_tests(std::span<const RunTrace> traces) {
  std::vector<std::string> datasets;
  std::map<std::string, std::vector<std::string>> methods;
  std::map<std::pair<std::string, std::string>, std::vector<double>> samples;
  for (const RunTrace& t : traces) {
    if (!methods.contains(t.dataset)) datasets.push_back(t.dataset);
    auto& ms = methods[t.dataset];
    if (std::find(ms.begin(), ms.end(), t.method) == ms.end()) ms.push_back(t.method);
    samples[{t.dataset, t.method}].push_back(t.best_test_rmse);
  }
  std::vector<PairwiseTest> out;
  for (const std::string& ds : datasets) {
    const auto& ms = methods[ds];
    for (std::size_t i = 0; i < ms.size(); ++i) {
      for (std::size_t j = i + 1; j < ms.size(); ++j) {
        PairwiseTest p;
        p.method_a = ms[i];
        p.method_b = ms[j];
        p.dataset = ds;
        p.p_value = wilcoxon_ranksum(samples[{ds, ms[i]}], samples[{ds, ms[j]}]);
        p.significant = p.p_value < kAlpha;
        out.push_back(p);
      }
    }
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_csv(const std::string& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << header << '\n';
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path);
}

}  // namespace

void write_results_csv(const std::string& path, std::span<const RunTrace> traces) {
  auto out = open_csv(path, "method,dataset,seed,best_test_rmse,best_size");
  for (const RunTrace& t : traces) {
    out << t.method << ',' << t.dataset << ',' << t.seed << ',' << format_double(t.best_test_rmse)
        << ',' << t.best_size << '\n';
  }
  finish(out, path);
}

void write_trace_csv(const std::string& path, std::span<const RunTrace> traces) {
  auto out = open_csv(path, "method,dataset,seed,generation,best_train_rmse,best_size");
  for (const RunTrace& t : traces) {
    for (const GenerationRecord& g : t.generations) {
      out << t.method << ',' << t.dataset << ',' << t.seed << ',' << g.generation << ','
          << format_double(g.best_train_rmse) << ',' << g.best_size << '\n';
    }
  }
  finish(out, path);
}

void write_variations_csv(const std::string& path, std::span<const RunTrace> traces) {
  auto out = open_csv(path,
                      "method,dataset,seed,generation,parent_size,offspring_size,sd_test,"
                      "structurally_different");
  for (const RunTrace& t : traces) {
    for (const VariationRecord& v : t.variations) {
      out << t.method << ',' << t.dataset << ',' << t.seed << ',' << v.generation << ','
          << v.parent_size << ',' << v.offspring_size << ',' << format_double(v.sd_test) << ','
          << (v.structurally_different ? 1 : 0) << '\n';
    }
  }
  finish(out, path);
}

void write_series_csv(const std::string& path, std::span<const MethodSummary> summaries,
                      const std::string& metric) {
  auto out = open_csv(path, "method,dataset,generation,median,q25,q75");
  for (const MethodSummary& s : summaries) {
    const auto it = s.series.find(metric);
    if (it == s.series.end()) continue;
    for (const SeriesPoint& p : it->second) {
      out << s.method << ',' << s.dataset << ',' << p.generation << ','
          << format_double(p.q.median) << ',' << format_double(p.q.q25) << ','
          << format_double(p.q.q75) << '\n';
    }
  }
  finish(out, path);
}

void write_stats_csv(const std::string& path, std::span<const PairwiseTest> tests) {
  auto out = open_csv(path, "method_a,method_b,dataset,p_value,significant");
  for (const PairwiseTest& t : tests) {
    out << t.method_a << ',' << t.method_b << ',' << t.dataset << ','
        << format_double(t.p_value) << ',' << (t.significant ? 1 : 0) << '\n';
  }
  finish(out, path);
}

void write_curve_csv(const std::string& path, std::span<const LossPoint> curve) {
  auto out = open_csv(path, "step,loss");
  for (const LossPoint& p : curve) out << p.step << ',' << format_double(p.loss) << '\n';
  finish(out, path);
}

}  // namespace tsgp
