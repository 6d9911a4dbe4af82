#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "test_util.hpp"
#include "tsgp/bench.hpp"
#include "tsgp/corpus.hpp"
#include "tsgp/fetch.hpp"

// After Eigen: resolv.h (via httplib) defines a _res macro.
#include <httplib.h>
#include <zlib.h>

using namespace tsgp;
using tsgp::test::code_of;
using tsgp::test::temp_path;

namespace {

namespace fs = std::filesystem;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string esl_like(int rows, char sep = ',') {
  std::ostringstream os;
  os << "in1" << sep << "in2" << sep << "in3" << sep << "in4" << sep << "target\n";
  Rng rng(1);
  std::uniform_int_distribution<int> score(0, 9);
  for (int r = 0; r < rows; ++r) {
    int s = 0;
    for (int c = 0; c < 4; ++c) {
      const int v = score(rng);
      s += v;
      os << v << sep;
    }
    os << s / 4 << '\n';
  }
  return os.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string gzip(const std::string& raw) {
  z_stream zs{};
  REQUIRE(deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8,
                       Z_DEFAULT_STRATEGY) == Z_OK);
  std::string out(deflateBound(&zs, raw.size()) + 32, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  REQUIRE(deflate(&zs, Z_FINISH) == Z_STREAM_END);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  return out;
}

RunTrace fake_trace(const std::string& method, double test_rmse, std::uint64_t seed) {
  RunTrace t;
  t.method = method;
  t.dataset = "toy";
  t.seed = seed;
  t.best_test_rmse = test_rmse;
  t.best_size = 5;
  t.generations = {{0, 1.0, 3}, {1, 0.8, 5}};
  return t;
}

Dataset synthetic_dataset(int m, std::uint64_t seed) {
  Rng rng(seed);
  const SyntheticProblem p = gen_synthetic_problem(3, m, 0.1, rng);
  return make_dataset("synth", {"a", "b", "c"}, p.x, p.y);
}

}  // namespace

TEST_CASE("load_csv: ESL-shaped file") {
  const std::string path = temp_path("esl.csv");
  write_text(path, esl_like(488));
  const Dataset ds = load_csv(path, "target");
  CHECK(ds.d() == 4);
  CHECK(ds.m() == 488);
  CHECK(ds.name == "tsgp_test_esl");
  CHECK(ds.feature_names == std::vector<std::string>{"in1", "in2", "in3", "in4"});
  for (int c = 0; c < 4; ++c) {
    const auto col = ds.x.col(c).array();
    CHECK(std::abs(col.mean()) < 1e-9);
    CHECK(std::abs(std::sqrt((col - col.mean()).square().mean()) - 1.0) < 1e-9);
  }
  CHECK(std::abs(ds.y.mean()) < 1e-9);

  const std::string tsv = temp_path("esl.tsv");
  write_text(tsv, esl_like(488, '\t'));
  const Dataset t = load_csv(tsv, "target", "esl");
  CHECK(t.name == "esl");
  CHECK(t.x == ds.x);
  fs::remove(path);
  fs::remove(tsv);
}

TEST_CASE("load_csv: error codes") {
  const std::string path = temp_path("bad.csv");
  write_text(path, esl_like(30));
  CHECK(code_of([&] { load_csv(path, "y"); }) == ErrorCode::kMissingTarget);

  std::string text = esl_like(30);
  text.replace(text.find("\n") + 1, 1, "x");
  write_text(path, text);
  CHECK(code_of([&] { load_csv(path, "target"); }) == ErrorCode::kNonNumericCell);

  write_text(path, esl_like(kMinRows - 1));
  CHECK(code_of([&] { load_csv(path, "target"); }) == ErrorCode::kTooFewRows);
  write_text(path, esl_like(kMinRows));
  CHECK(load_csv(path, "target").m() == kMinRows);

  fs::remove(path);
  CHECK(code_of([&] { load_csv(path, "target"); }) == ErrorCode::kIo);
}

TEST_CASE("split: determinism, sizes and partition") {
  for (const int m : {20, 21, 488}) {
    const SplitIndices a = split_indices(m, 7);
    const SplitIndices b = split_indices(m, 7);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(static_cast<int>(a.train.size()) == (m + 1) / 2);
    CHECK(a.train.size() - a.test.size() <= 1);
    std::set<int> all(a.train.begin(), a.train.end());
    for (int i : a.test) CHECK(all.insert(i).second);
    CHECK(static_cast<int>(all.size()) == m);
    CHECK(std::is_sorted(a.train.begin(), a.train.end()));
  }
  CHECK(split_indices(100, 1).train != split_indices(100, 2).train);
}

TEST_CASE("quantiles") {
  const std::vector<double> v{0.3, 0.5, 0.4};
  CHECK(median(v) == 0.4);
  const std::vector<double> even{0.3, 0.5, 0.4, 0.9};
  CHECK(median(even) == doctest::Approx(0.45).epsilon(1e-15));
  const Quartiles q = quartiles(even);
  CHECK(q.q25 == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(q.q75 == doctest::Approx(0.6).epsilon(1e-15));
  const std::vector<double> one{2.5};
  CHECK(quartiles(one).q25 == 2.5);
  CHECK(quartiles(one).q75 == 2.5);
  CHECK(code_of([] { median(std::vector<double>{}); }) == ErrorCode::kEmpty);
}

TEST_CASE("Wilcoxon rank-sum: reference values") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(wilcoxon_ranksum(a, b) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(wilcoxon_ranksum(a, a) == doctest::Approx(1.0));

  const std::vector<double> c{0.31, 0.42, 0.27, 0.55, 0.61, 0.38, 0.49, 0.33};
  const std::vector<double> d{0.52, 0.58, 0.47, 0.66, 0.71, 0.44, 0.69, 0.62};
  CHECK(wilcoxon_ranksum(c, d) == doctest::Approx(0.014763014763014764).epsilon(1e-10));
  CHECK(wilcoxon_normal(c, d) == doctest::Approx(0.018129007864971982).epsilon(1e-10));

  const std::vector<double> e{1, 2, 2, 3, 3, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
  const std::vector<double> f{3, 4, 4, 5, 6, 7, 7, 8, 9, 9, 10, 15, 16, 17, 18};
  CHECK(wilcoxon_ranksum(e, f) == doctest::Approx(0.1449849016607587).epsilon(1e-10));

  const std::vector<double> x{0.346,  0.822,  0.33,   -1.303, 0.905,  0.446,  -0.537, 0.581,
                              0.365,  0.294,  0.028,  0.547,  -0.736, -0.163, -0.482, 0.599,
                              0.04,   -0.292, -0.782, -0.257, 0.008,  -0.276, 1.294,  1.007,
                              -2.711, -1.889, -0.175, -0.422, 0.214,  0.217};
  const std::vector<double> y{2.618,  -0.612, 0.122, 2.543,  1.147,  1.163,  -0.014, -1.148,
                              0.667,  0.609,  -0.727, -0.183, 0.428, -0.445, 0.402,  0.595,
                              0.536,  -0.006, 1.094, 1.391,  0.821,  -0.318, 1.232,  -0.001,
                              1.379,  -0.572, 1.414, 0.48,   -0.749, 0.186};
  CHECK(wilcoxon_ranksum(x, y) == doctest::Approx(0.0594279151689524).epsilon(1e-10));

  const std::vector<double> tied{1, 1, 2};
  CHECK(code_of([&] { wilcoxon_exact(tied, b); }) == ErrorCode::kPrecondition);
}

TEST_CASE("Wilcoxon rank-sum: symmetry and exact-vs-normal agreement") {
  Rng rng(31);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-1.5, 1.5);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double s = shift(rng);
    std::vector<double> a(8), b(8);
    for (double& v : a) v = n(rng);
    for (double& v : b) v = n(rng) + s;
    const double p = wilcoxon_ranksum(a, b);
    CHECK(p == wilcoxon_ranksum(b, a));
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
    worst = std::max(worst, std::abs(p - wilcoxon_normal(a, b)));
  }
  MESSAGE("max |exact - normal| = " << worst);
  CHECK(worst <= 0.02);
}

TEST_CASE("aggregate_runs: examples and errors") {
  std::vector<RunTrace> runs{fake_trace("stdgp", 0.3, 1), fake_trace("stdgp", 0.5, 2),
                             fake_trace("stdgp", 0.4, 3)};
  const MethodSummary s = aggregate_runs(runs);
  CHECK(s.runs == 3);
  CHECK(s.test_rmse.median == 0.4);
  CHECK(s.test_rmse.q25 <= s.test_rmse.median);
  CHECK(s.test_rmse.median <= s.test_rmse.q75);
  REQUIRE(s.series.at("best_train_rmse").size() == 2);
  CHECK(s.series.at("best_train_rmse")[1].q.median == 0.8);

  const MethodSummary single = aggregate_runs(std::span<const RunTrace>(runs.data(), 1));
  CHECK(single.test_rmse.median == 0.3);
  CHECK(single.test_rmse.q75 - single.test_rmse.q25 == 0.0);

  std::vector<RunTrace> shuffled{runs[2], runs[0], runs[1]};
  const MethodSummary p = aggregate_runs(shuffled);
  CHECK(p.test_rmse.q25 == s.test_rmse.q25);
  CHECK(p.test_rmse.q75 == s.test_rmse.q75);

  CHECK(code_of([] { aggregate_runs({}); }) == ErrorCode::kEmpty);
  std::vector<RunTrace> mixed{runs[0], fake_trace("slim", 0.2, 4)};
  CHECK(code_of([&] { aggregate_runs(mixed); }) == ErrorCode::kMixedMethods);
  std::vector<RunTrace> uneven{runs[0], runs[1]};
  uneven[1].generations.pop_back();
  CHECK(code_of([&] { aggregate_runs(uneven); }) == ErrorCode::kPrecondition);
}

TEST_CASE("aggregate_runs: sd series keeps structurally different, finite variations") {
  RunTrace t = fake_trace("tsgp", 0.3, 1);
  t.variations = {{1, 3, 3, 0.0, false},
                  {1, 3, 5, 0.2, true},
                  {1, 3, 5, 0.6, true},
                  {1, 3, 5, std::numeric_limits<double>::infinity(), true}};
  const MethodSummary s = aggregate_runs(std::span<const RunTrace>(&t, 1));
  const auto& sd = s.series.at("sd_test");
  REQUIRE(sd.size() == 1);
  CHECK(sd[0].generation == 1);
  CHECK(sd[0].q.median == doctest::Approx(0.4));
}

TEST_CASE("pairwise tests") {
  std::vector<RunTrace> runs;
  for (int i = 0; i < 5; ++i) {
    runs.push_back(fake_trace("stdgp", 1.0 + i, static_cast<std::uint64_t>(i)));
    runs.push_back(fake_trace("tsgp", 0.1 * i, static_cast<std::uint64_t>(i)));
  }
  const auto tests = pairwise_tests(runs);
  REQUIRE(tests.size() == 1);
  CHECK(tests[0].dataset == "toy");
  CHECK(tests[0].p_value == doctest::Approx(2.0 / 252.0).epsilon(1e-12));
  CHECK(tests[0].significant);
}

TEST_CASE("bench: CSV outputs recompute to the same medians") {
  const Dataset ds = synthetic_dataset(60, 5);
  BenchConfig cfg;
  cfg.methods = {"stdgp", "slim"};
  cfg.runs = 5;
  cfg.seed = 3;
  cfg.gp.pop_size = 20;
  cfg.gp.generations = 4;
  cfg.slim.pop_size = 20;
  cfg.slim.generations = 4;
  const BenchResult r = run_bench(ds, cfg);
  CHECK(r.traces.size() == 10);
  CHECK(r.summaries.size() == 2);
  CHECK(r.tests.size() == 1);
  CHECK(code_of([&] {
          BenchConfig with_tsgp = cfg;
          with_tsgp.methods = {"tsgp"};
          run_bench(ds, with_tsgp);
        }) == ErrorCode::kPrecondition);

  const std::string dir = temp_path("bench_out");
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<BenchResult> all{r};
  write_bench_outputs(dir, all);
  for (const char* f : {"results.csv", "trace.csv", "variations.csv", "stats.csv",
                        "series_best_train_rmse.csv", "series_best_size.csv",
                        "series_sd_test.csv"}) {
    CHECK(fs::exists(fs::path(dir) / f));
  }

  std::map<std::string, std::vector<double>> test_rmse;
  const auto results = read_csv((fs::path(dir) / "results.csv").string());
  REQUIRE(results.size() == 11);
  CHECK(results[0] == std::vector<std::string>{"method", "dataset", "seed", "best_test_rmse",
                                               "best_size"});
  for (std::size_t i = 1; i < results.size(); ++i) {
    test_rmse[results[i][0]].push_back(std::stod(results[i][3]));
  }
  std::map<std::pair<std::string, int>, std::vector<double>> train;
  const auto trace = read_csv((fs::path(dir) / "trace.csv").string());
  for (std::size_t i = 1; i < trace.size(); ++i) {
    train[{trace[i][0], std::stoi(trace[i][3])}].push_back(std::stod(trace[i][4]));
  }
  const auto series = read_csv((fs::path(dir) / "series_best_train_rmse.csv").string());
  CHECK(series.size() == 1 + 2 * 5);
  for (const MethodSummary& s : r.summaries) {
    CHECK(s.test_rmse.median == median(test_rmse.at(s.method)));
    for (const SeriesPoint& pt : s.series.at("best_train_rmse")) {
      CHECK(pt.q.median == median(train.at({s.method, pt.generation})));
    }
  }
  for (std::size_t i = 1; i < series.size(); ++i) {
    CHECK(std::stod(series[i][3]) == median(train.at({series[i][0], std::stoi(series[i][2])})));
  }

  cfg.threads = 3;
  const BenchResult again = run_bench(ds, cfg);
  for (std::size_t i = 0; i < r.traces.size(); ++i) {
    CHECK(again.traces[i].best_test_rmse == r.traces[i].best_test_rmse);
    CHECK(again.traces[i].seed == r.traces[i].seed);
  }
  fs::remove_all(dir);
}

TEST_CASE("format_double round trips") {
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = n(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("fetch: local server, cache and errors") {
  const std::string tsv = esl_like(40, '\t');
  const std::string body = gzip(tsv);
  CHECK(gunzip(body) == tsv);
  CHECK(code_of([] { gunzip("not gzip at all"); }) == ErrorCode::kFormat);

  httplib::Server server;
  std::atomic<int> hits{0};
  server.Get("/datasets/esl_toy/esl_toy.tsv.gz", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content(body, "application/gzip");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const std::string base = "http://127.0.0.1:" + std::to_string(port) + "/datasets";

  const std::string cache = temp_path("cache");
  fs::remove_all(cache);
  const std::string path = fetch_pmlb("esl_toy", cache, base);
  CHECK(hits == 1);
  CHECK(path == cached_dataset_path("esl_toy", cache));
  const Dataset ds = load_csv(path, "target");
  CHECK(ds.d() == 4);
  CHECK(ds.name == "esl_toy");

  CHECK(code_of([&] { fetch_pmlb("missing", cache, base); }) == ErrorCode::kNotFound);
  CHECK_FALSE(fs::exists(cached_dataset_path("missing", cache)));
  CHECK(code_of([&] { fetch_pmlb("../etc", cache, base); }) == ErrorCode::kNotFound);

  server.stop();
  th.join();
  CHECK(fetch_pmlb("esl_toy", cache, base) == path);
  CHECK(hits == 1);
  CHECK(code_of([&] { fetch_pmlb("other", cache, base); }) == ErrorCode::kNetwork);
  CHECK_FALSE(fs::exists(cached_dataset_path("other", cache)));
  fs::remove_all(cache);
}
