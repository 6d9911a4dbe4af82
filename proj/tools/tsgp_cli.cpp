#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tsgp/bench.hpp"
#include "tsgp/checkpoint.hpp"
#include "tsgp/corpus.hpp"
#include "tsgp/error.hpp"
#include "tsgp/fetch.hpp"
#include "tsgp/ivf_index.hpp"
#include "tsgp/manifest.hpp"
#include "tsgp/parallel.hpp"
#include "tsgp/trainer.hpp"
#include "tsgp/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsgp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// JSON config: top-level keys are global options, objects named after a
// subcommand hold that subcommand's options. Command-line flags win.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    // A run manifest replays its resolved config.
    if (j.contains("tool_version") && j.contains("config") && j["config"].is_object()) {
      j = json(j["config"]);
    }
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static void collect(const json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it->is_object()) {
        auto sub = parents;
        sub.push_back(it.key());
        collect(*it, sub, items);
        continue;
      }
      // Unset options, as echoed in manifests.
      if (it->is_null() || (it->is_array() && it->empty())) continue;
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = it.key();
      if (it->is_array()) {
        for (const json& v : *it) item.inputs.push_back(scalar(v, it.key()));
      } else {
        item.inputs.push_back(scalar(*it, it.key()));
      }
      items.push_back(std::move(item));
    }
  }

  static std::string scalar(const json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported value for '" + key + "'");
  }
};

json typed(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) {
      if (s.find_first_of(".eE") == std::string::npos) return std::stoll(s);
      return d;
    }
  } catch (const std::exception&) {
  }
  return s;
}

// Every option of `app`, explicit values or defaults.
json resolved_options(const CLI::App* app) {
  json out = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names.front() == "help" || names.front() == "config") continue;
    std::vector<std::string> values;
    if (opt->count() > 0) {
      values = opt->results();
    } else if (!opt->get_default_str().empty() && opt->get_default_str() != "{}") {
      values = {opt->get_default_str()};
    }
    if (values.empty()) {
      out[names.front()] = opt->get_expected_max() > 1 ? json::array() : json(nullptr);
    } else if (opt->get_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(typed(v));
      out[names.front()] = arr;
    } else {
      out[names.front()] = typed(values.back());
    }
  }
  return out;
}

struct Global {
  std::uint64_t seed = 0;
  int threads = default_threads();
  bool deterministic = false;

  int workers() const { return deterministic ? 1 : std::max(1, threads); }

  RunManifest manifest(const CLI::App* sub) const {
    RunManifest m;
    m.subcommand = sub->get_name();
    m.seed = seed;
    m.config = {{"seed", seed},
                {"threads", workers()},
                {"deterministic", deterministic},
                {sub->get_name(), resolved_options(sub)}};
    return m;
  }
};

void write_file_manifest(RunManifest m, const std::string& out,
                         const std::vector<std::string>& outputs) {
  m.outputs = outputs;
  write_manifest(m, out + ".manifest.json");
}

void write_dir_manifest(RunManifest m, const std::string& dir,
                        const std::vector<std::string>& outputs) {
  for (const auto& p : outputs) m.outputs.push_back(fs::path(p).filename().string());
  write_manifest(m, (fs::path(dir) / "manifest.json").string());
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// --- gen-corpus -------------------------------------------------------------

struct GenCorpusArgs {
  CorpusConfig config;
  std::string out;
};

void add_gen_corpus(CLI::App& app, GenCorpusArgs& a) {
  auto* sub = app.add_subcommand("gen-corpus", "Harvest functions from synthetic problems");
  sub->add_option("--problems", a.config.problems, "Synthetic problems")
      ->check(CLI::PositiveNumber);
  sub->add_option("--n-vars", a.config.n_vars, "Input features")->check(CLI::Range(1, 64));
  sub->add_option("--rows", a.config.rows, "Rows per problem")->check(CLI::Range(2, 1000000));
  sub->add_option("--noise", a.config.noise_sigma, "Gaussian noise sigma")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--m-sem", a.config.m_sem, "Semantic sample size")->check(CLI::Range(2, 100000));
  sub->add_option("--pop", a.config.gp.pop_size, "stdGP population")->check(CLI::PositiveNumber);
  sub->add_option("--gens", a.config.gp.generations, "stdGP generations")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", a.out, "corpus.jsonl")->required();
}

int run_gen_corpus(const Global& g, const CLI::App* sub, GenCorpusArgs a) {
  a.config.threads = g.workers();
  const Corpus corpus = build_corpus(a.config, g.seed);
  ensure_parent(a.out);
  write_corpus_jsonl(corpus, a.out);
  write_file_manifest(g.manifest(sub), a.out, {a.out, a.out + ".points.json"});
  std::cerr << "corpus: " << corpus.size() << " functions -> " << a.out << '\n';
  return kExitOk;
}

// --- mine-pairs -------------------------------------------------------------

struct MinePairsArgs {
  std::string corpus;
  MiningConfig config;
  std::string index = "exact";
  int clusters = 0;
  std::string out;
};

void add_mine_pairs(CLI::App& app, MinePairsArgs& a) {
  auto* sub = app.add_subcommand("mine-pairs", "Nearest-neighbour training pairs from a corpus");
  sub->add_option("--corpus", a.corpus, "corpus.jsonl")->required()->check(CLI::ExistingFile);
  sub->add_option("--k", a.config.k, "Neighbours per function")->check(CLI::PositiveNumber);
  sub->add_option("--sd-max", a.config.sd_max, "Largest semantic distance kept")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-len", a.config.max_len, "Longest sequence kept")
      ->check(CLI::PositiveNumber);
  sub->add_option("--index", a.index, "exact or ivf")->check(CLI::IsMember({"exact", "ivf"}));
  sub->add_option("--clusters", a.clusters, "IVF lists (0 = sqrt of corpus size)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--n-probe", a.config.n_probe, "IVF lists probed per query")
      ->check(CLI::PositiveNumber);
  sub->add_option("--out", a.out, "pairs.jsonl")->required();
}

int run_mine_pairs(const Global& g, const CLI::App* sub, MinePairsArgs a) {
  const Corpus corpus = read_corpus_jsonl(a.corpus);
  a.config.threads = g.workers();
  std::optional<IvfIndex> index;
  if (a.index == "ivf" && corpus.size() > 0) {
    int clusters = a.clusters > 0 ? a.clusters
                                  : static_cast<int>(std::sqrt(static_cast<double>(corpus.size())));
    clusters = std::clamp(clusters, 1, static_cast<int>(corpus.size()));
    Rng rng(derive_seed(g.seed, 0));
    index = IvfIndex::build(corpus, clusters, rng);
    a.config.index = &*index;
  }
  const MiningResult mined = mine_pairs(corpus, a.config);
  ensure_parent(a.out);
  write_pairs_jsonl(mined.pairs, a.out);
  RunManifest m = g.manifest(sub);
  m.inputs = {a.corpus, a.corpus + ".points.json"};
  write_file_manifest(m, a.out, {a.out});
  std::cerr << "pairs: " << mined.pairs.size() << " (" << mined.dropped_over_length
            << " over length) -> " << a.out << '\n';
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string pairs;
  int n_vars = 4;
  Hyperparams hyper;
  int max_steps = 0;
  std::string out;
  std::string curve;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train the transformer on mined pairs");
  auto& h = a.hyper;
  h.ffn_dim = 0;
  sub->add_option("--pairs", a.pairs, "pairs.jsonl")->required()->check(CLI::ExistingFile);
  sub->add_option("--n-vars", a.n_vars, "Variables in the vocabulary")->check(CLI::Range(1, 64));
  sub->add_option("--d-model", h.d_model, "Model width")->check(CLI::PositiveNumber);
  sub->add_option("--heads", h.n_heads, "Attention heads")->check(CLI::PositiveNumber);
  sub->add_option("--enc-layers", h.n_encoder_layers, "Encoder layers")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--dec-layers", h.n_decoder_layers, "Decoder layers")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--ffn", h.ffn_dim, "Feed-forward width (0 = 4 * d-model)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--max-len", h.max_len, "Longest token sequence")->check(CLI::PositiveNumber);
  sub->add_option("--dropout", h.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.99));
  sub->add_option("--lr", h.lr, "Learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--weight-decay", h.weight_decay, "Decoupled weight decay")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--epochs", h.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  sub->add_option("--batch-size", h.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--clip-norm", h.clip_norm, "Global gradient-norm clip (0 = off)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--max-steps", a.max_steps, "Optimizer steps instead of epochs (0 = off)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", a.out, "model.tsgp")->required();
  sub->add_option("--curve", a.curve, "Loss curve CSV (default <out>.curve.csv)");
}

int run_train(const Global& g, const CLI::App* sub, TrainArgs a) {
  if (a.hyper.ffn_dim == 0) a.hyper.ffn_dim = 4 * a.hyper.d_model;
  a.hyper.validate();
  const std::vector<TrainingPair> pairs = read_pairs_jsonl(a.pairs);
  if (pairs.empty()) throw Error(ErrorCode::kEmpty, a.pairs + " holds no pairs");
  for (const auto& p : pairs) {
    if (ExprTree::from_prefix(p.input).variables_required() > a.n_vars ||
        ExprTree::from_prefix(p.output).variables_required() > a.n_vars) {
      throw Error(ErrorCode::kStructural, "pairs use more than --n-vars variables");
    }
  }
  TrainOptions opts;
  opts.max_steps = a.max_steps;
  opts.threads = g.workers();
  const TrainResult r = train(pairs, a.hyper, Vocabulary(a.n_vars), g.seed, opts);
  if (a.curve.empty()) a.curve = a.out + ".curve.csv";
  ensure_parent(a.out);
  save_checkpoint(r.model, a.out);
  write_curve_csv(a.curve, r.curve);
  RunManifest m = g.manifest(sub);
  m.inputs = {a.pairs};
  write_file_manifest(m, a.out, {a.out, a.curve});
  std::cerr << "trained " << r.curve.size() << " steps, final loss "
            << (r.curve.empty() ? 0.0 : r.curve.back().loss) << " -> " << a.out << '\n';
  return kExitOk;
}

// --- search -----------------------------------------------------------------

struct DataArgs {
  std::string data;
  std::string target = "target";
  bool synthetic = false;
  int n_vars = 4;
  int rows = 200;
  double noise = 0.1;
  std::uint64_t problem_seed = 1;
};

void add_data_options(CLI::App* sub, DataArgs& d) {
  sub->add_option("--data", d.data, "CSV/TSV dataset")->check(CLI::ExistingFile);
  sub->add_option("--target", d.target, "Target column");
  sub->add_flag("--synthetic", d.synthetic, "Use a generated linear problem instead of --data");
  sub->add_option("--n-vars", d.n_vars, "Synthetic features")->check(CLI::Range(1, 64));
  sub->add_option("--rows", d.rows, "Synthetic rows")->check(CLI::Range(20, 1000000));
  sub->add_option("--noise", d.noise, "Synthetic noise sigma")->check(CLI::NonNegativeNumber);
  sub->add_option("--problem-seed", d.problem_seed, "Synthetic problem seed");
}

Dataset load_data(const DataArgs& d) {
  if (d.synthetic == !d.data.empty()) {
    throw CLI::ValidationError("data", "give exactly one of --data and --synthetic");
  }
  if (!d.data.empty()) return load_csv(d.data, d.target);
  Rng rng(d.problem_seed);
  const SyntheticProblem p = gen_synthetic_problem(d.n_vars, d.rows, d.noise, rng);
  std::vector<std::string> names;
  for (int i = 0; i < d.n_vars; ++i) names.push_back("x" + std::to_string(i + 1));
  return make_dataset("synthetic_" + std::to_string(d.problem_seed), names, p.x, p.y);
}

void add_run_options(CLI::App* sub, BenchConfig& c) {
  sub->add_option("--pop", c.gp.pop_size, "Population size")->check(CLI::PositiveNumber);
  sub->add_option("--gens", c.gp.generations, "Generations")->check(CLI::NonNegativeNumber);
  sub->add_option("--tournament", c.gp.tournament_size, "Tournament size")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-depth", c.gp.max_depth, "Maximum tree depth")
      ->check(CLI::PositiveNumber);
  sub->add_option("--sdd", c.search.sd_desired, "Desired semantic distance")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--resample-limit", c.search.resample_limit, "Redraws of unchanged offspring")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--max-len", c.search.max_len, "Offspring token budget")
      ->check(CLI::Range(2, 100000));
  sub->add_option("--inflate-prob", c.slim.inflate_prob, "SLIM inflation probability")
      ->check(CLI::Range(0.0, 1.0));
}

// Copies the shared run settings into every engine configuration.
void sync_run_options(BenchConfig& c) {
  c.slim.pop_size = c.search.pop_size = c.gp.pop_size;
  c.slim.generations = c.search.generations = c.gp.generations;
  c.slim.tournament_size = c.search.tournament_size = c.gp.tournament_size;
  c.search.max_depth = c.gp.max_depth;
}

struct SearchArgs {
  std::string method = "tsgp";
  std::string model;
  DataArgs data;
  BenchConfig config;
  std::string out;
};

void add_search(CLI::App& app, SearchArgs& a) {
  auto* sub = app.add_subcommand("search", "One run of tsgp, stdgp or slim");
  sub->add_option("--method", a.method, "tsgp, stdgp or slim")
      ->check(CLI::IsMember({"tsgp", "stdgp", "slim"}));
  sub->add_option("--model", a.model, "Checkpoint (tsgp)")->check(CLI::ExistingFile);
  add_data_options(sub, a.data);
  add_run_options(sub, a.config);
  sub->add_option("--out", a.out, "Output directory")->required();
}

int run_search(const Global& g, const CLI::App* sub, SearchArgs a) {
  if (a.method == "tsgp" && a.model.empty()) {
    throw CLI::ValidationError("--model", "tsgp needs --model");
  }
  const Dataset ds = load_data(a.data);
  std::optional<ModelParams> model;
  if (!a.model.empty()) model = load_checkpoint(a.model);
  sync_run_options(a.config);
  a.config.seed = g.seed;
  a.config.methods = {a.method};
  const RunTrace trace = run_method(a.method, ds, a.config, model ? &*model : nullptr, 0);

  fs::create_directories(a.out);
  const std::vector<RunTrace> traces{trace};
  std::vector<std::string> written;
  const auto at = [&](const char* f) {
    written.push_back((fs::path(a.out) / f).string());
    return written.back();
  };
  write_trace_csv(at("trace.csv"), traces);
  write_variations_csv(at("variations.csv"), traces);
  write_results_csv(at("results.csv"), traces);
  RunManifest m = g.manifest(sub);
  if (!a.data.data.empty()) m.inputs.push_back(a.data.data);
  if (!a.model.empty()) m.inputs.push_back(a.model);
  write_dir_manifest(m, a.out, written);
  std::cerr << a.method << ": best train " << trace.generations.back().best_train_rmse
            << ", test " << trace.best_test_rmse << ", size " << trace.best_size << '\n';
  return kExitOk;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> data;
  std::vector<std::string> pmlb;
  std::string target = "target";
  std::string cache_dir = "data_cache";
  std::string base_url = kPmlbBaseUrl;
  std::string model;
  BenchConfig config;
  std::string out;
};

void add_bench(CLI::App& app, BenchArgs& a) {
  auto* sub = app.add_subcommand("bench", "Repeated runs of several methods on datasets");
  sub->add_option("--data", a.data, "CSV/TSV datasets")->check(CLI::ExistingFile);
  sub->add_option("--pmlb", a.pmlb, "PMLB dataset names (fetched into --cache-dir)");
  sub->add_option("--target", a.target, "Target column");
  sub->add_option("--cache-dir", a.cache_dir, "Dataset cache");
  sub->add_option("--base-url", a.base_url, "PMLB datasets URL");
  sub->add_option("--methods", a.config.methods, "Methods to run")
      ->check(CLI::IsMember({"tsgp", "stdgp", "slim"}));
  sub->add_option("--runs", a.config.runs, "Runs per method and dataset")
      ->check(CLI::PositiveNumber);
  sub->add_option("--model", a.model, "Checkpoint (tsgp)")->check(CLI::ExistingFile);
  add_run_options(sub, a.config);
  sub->add_option("--out", a.out, "Output directory")->required();
}

int run_bench_cmd(const Global& g, const CLI::App* sub, BenchArgs a) {
  const bool needs_model =
      std::find(a.config.methods.begin(), a.config.methods.end(), "tsgp") != a.config.methods.end();
  if (needs_model && a.model.empty()) throw CLI::ValidationError("--model", "tsgp needs --model");
  if (a.data.empty() && a.pmlb.empty()) {
    throw CLI::ValidationError("data", "give --data or --pmlb");
  }
  std::vector<std::string> paths = a.data;
  for (const auto& name : a.pmlb) paths.push_back(fetch_pmlb(name, a.cache_dir, a.base_url));

  std::optional<ModelParams> model;
  if (!a.model.empty()) model = load_checkpoint(a.model);
  sync_run_options(a.config);
  a.config.seed = g.seed;
  a.config.threads = g.workers();

  std::vector<BenchResult> results;
  for (const auto& path : paths) {
    const Dataset ds = load_csv(path, a.target);
    results.push_back(run_bench(ds, a.config, model ? &*model : nullptr));
    for (const MethodSummary& s : results.back().summaries) {
      std::cerr << ds.name << " " << s.method << ": median test RMSE " << s.test_rmse.median
                << ", median size " << s.size.median << '\n';
    }
  }
  const std::vector<std::string> written = write_bench_outputs(a.out, results);
  RunManifest m = g.manifest(sub);
  m.inputs = paths;
  if (!a.model.empty()) m.inputs.push_back(a.model);
  write_dir_manifest(m, a.out, written);
  return kExitOk;
}

// --- fetch-data -------------------------------------------------------------

struct FetchArgs {
  std::vector<std::string> names;
  std::string cache_dir = "data_cache";
  std::string base_url = kPmlbBaseUrl;
};

void add_fetch(CLI::App& app, FetchArgs& a) {
  auto* sub = app.add_subcommand("fetch-data", "Download PMLB datasets into the cache");
  sub->add_option("--name", a.names, "Dataset names")->required();
  sub->add_option("--cache-dir", a.cache_dir, "Dataset cache");
  sub->add_option("--base-url", a.base_url, "PMLB datasets URL");
}

int run_fetch(const FetchArgs& a) {
  for (const auto& name : a.names) std::cout << fetch_pmlb(name, a.cache_dir, a.base_url) << '\n';
  return kExitOk;
}

// --- verify-model -----------------------------------------------------------

struct VerifyArgs {
  std::string model;
  int probes = 200;
  int positions = 20;
  int batch = 4;
  double tolerance = 1e-4;
};

void add_verify(CLI::App& app, VerifyArgs& a) {
  auto* sub = app.add_subcommand("verify-model", "Gradient, causality and round-trip checks");
  sub->add_option("--model", a.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  sub->add_option("--probes", a.probes, "Gradient probes")->check(CLI::PositiveNumber);
  sub->add_option("--positions", a.positions, "Causality probes")->check(CLI::PositiveNumber);
  sub->add_option("--batch", a.batch, "Random examples in the gradient batch")
      ->check(CLI::PositiveNumber);
  sub->add_option("--tolerance", a.tolerance, "Largest gradient relative error")
      ->check(CLI::PositiveNumber);
}

int run_verify(const Global& g, const VerifyArgs& a) {
  const ModelParams model = load_checkpoint(a.model);
  Rng rng(g.seed);
  std::vector<Example> batch;
  const int len = std::min(12, model.hyper.max_len);
  for (int i = 0; i < a.batch; ++i) batch.push_back(random_example(model, len, len, rng));

  const GradCheckResult grad = gradient_check(model, batch, a.probes, derive_seed(g.seed, 1));
  const CausalityResult causal = causality_probe(model, a.positions, derive_seed(g.seed, 2));
  const RoundTripResult trip = checkpoint_round_trip(model, derive_seed(g.seed, 3));

  const bool grad_ok = grad.max_rel_error < a.tolerance;
  const bool causal_ok = causal.violations == 0 && causal.max_attention_error <= 1e-6;
  const bool trip_ok = trip.bytes_identical && trip.logits_identical;
  std::cout << "gradient: " << (grad_ok ? "PASS" : "FAIL") << " max relative error "
            << grad.max_rel_error << " over " << grad.probes.size() << " probes\n"
            << "causality: " << (causal_ok ? "PASS" : "FAIL") << " " << causal.violations
            << " violations in " << causal.positions << " probes, attention row error "
            << causal.max_attention_error << '\n'
            << "round-trip: " << (trip_ok ? "PASS" : "FAIL") << " bytes "
            << (trip.bytes_identical ? "identical" : "differ") << ", logits "
            << (trip.logits_identical ? "identical" : "differ") << '\n';
  return grad_ok && causal_ok && trip_ok ? kExitOk : kExitNumeric;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFinite:
    case ErrorCode::kNonFiniteLoss:
      return kExitNumeric;
    case ErrorCode::kPrecondition:
      return kExitUsage;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer-based semantic variation for genetic programming"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config; command-line flags win");
  app.option_defaults()->always_capture_default();

  Global g;
  app.add_option("--seed", g.seed, "Base random seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", g.deterministic, "Force one thread");

  GenCorpusArgs gen;
  MinePairsArgs mine;
  TrainArgs tr;
  SearchArgs search;
  BenchArgs bench;
  FetchArgs fetch;
  VerifyArgs verify;
  add_gen_corpus(app, gen);
  add_mine_pairs(app, mine);
  add_train(app, tr);
  add_search(app, search);
  add_bench(app, bench);
  add_fetch(app, fetch);
  add_verify(app, verify);
  for (CLI::App* sub : app.get_subcommands({})) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "gen-corpus") return run_gen_corpus(g, sub, gen);
    if (name == "mine-pairs") return run_mine_pairs(g, sub, mine);
    if (name == "train") return run_train(g, sub, tr);
    if (name == "search") return run_search(g, sub, search);
    if (name == "bench") return run_bench_cmd(g, sub, bench);
    if (name == "fetch-data") return run_fetch(fetch);
    if (name == "verify-model") return run_verify(g, verify);
  } catch (const CLI::ParseError& e) {
    std::cerr << name << ": " << e.what() << "\n\n" << sub->help();
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << name << ": " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
