#include "tsgp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "tsgp/error.hpp"
#include "tsgp/ivf_index.hpp"
#include "tsgp/parallel.hpp"
#include "tsgp/semantics.hpp"

namespace tsgp {

using nlohmann::json;

SyntheticProblem gen_synthetic_problem(int d, int m, double noise_sigma, Rng& rng) {
  if (m < 10) throw Error(ErrorCode::kPrecondition, "synthetic problems need at least 10 rows");
  if (noise_sigma < 0.0) throw Error(ErrorCode::kPrecondition, "negative noise_sigma");
  SyntheticProblem p;
  p.noise_sigma = noise_sigma;
  p.x = standardize(sample_standard_inputs(m, d, rng)).data;
  std::normal_distribution<double> normal(0.0, 1.0);
  p.w.resize(d);
  for (int j = 0; j < d; ++j) p.w[j] = normal(rng);
  Vector target = p.x * p.w;
  if (noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (int i = 0; i < m; ++i) target[i] += noise(rng);
  }
  p.y = standardize(target).data.col(0);
  return p;
}

SplitData split_synthetic(const SyntheticProblem& problem) {
  const Eigen::Index m = problem.x.rows();
  const Eigen::Index half = m / 2;
  SplitData s;
  s.x_train = problem.x.topRows(half);
  s.y_train = problem.y.head(half);
  s.x_test = problem.x.bottomRows(m - half);
  s.y_test = problem.y.tail(m - half);
  return s;
}

std::optional<std::int64_t> Corpus::add(const ExprTree& tree, int problem_id) {
  std::string text = to_text(tree);
  if (by_text_.contains(text)) return std::nullopt;
  Vector sem = evaluate(tree, sem_points_);
  if (!sem.allFinite()) return std::nullopt;
  const auto id = static_cast<std::int64_t>(entries_.size());
  by_text_.emplace(std::move(text), id);
  entries_.push_back({id, problem_id, tree, std::move(sem)});
  return id;
}

std::optional<std::int64_t> Corpus::add_with_semantics(const ExprTree& tree, int problem_id,
                                                       Vector semantics) {
  if (semantics.size() != sem_points_.rows()) {
    throw Error(ErrorCode::kLengthMismatch, "entry semantics do not match the shared sample");
  }
  std::string text = to_text(tree);
  if (by_text_.contains(text) || !semantics.allFinite()) return std::nullopt;
  const auto id = static_cast<std::int64_t>(entries_.size());
  by_text_.emplace(std::move(text), id);
  entries_.push_back({id, problem_id, tree, std::move(semantics)});
  return id;
}

double Corpus::distance(std::int64_t id, const Vector& query) const {
  return (entries_[static_cast<std::size_t>(id)].semantics - query).norm();
}

std::vector<Neighbor> knn_search(const Corpus& corpus, const Vector& query, int k,
                                 std::optional<std::int64_t> exclude) {
  std::vector<Neighbor> all;
  all.reserve(corpus.size());
  for (std::int64_t id = 0; id < static_cast<std::int64_t>(corpus.size()); ++id) {
    if (exclude && *exclude == id) continue;
    const double sd = corpus.distance(id, query);
    if (sd == 0.0) continue;
    all.push_back({id, sd});
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    neighbor_less);
  all.resize(take);
  return all;
}

std::vector<Neighbor> knn_neighbors(const Corpus& corpus, std::int64_t query_id, int k) {
  if (k < 1) throw Error(ErrorCode::kPrecondition, "k must be >= 1");
  return knn_search(corpus, corpus.at(query_id).semantics, k, query_id);
}

std::vector<CorpusEntry> harvest_functions(const SyntheticProblem& problem, int problem_id,
                                           const GPConfig& config, const PrimitiveSet& prims,
                                           const Matrix& sem_points, Rng& rng) {
  SplitData data;
  data.x_train = problem.x;
  data.y_train = problem.y;
  data.x_test = Matrix(0, problem.x.cols());
  data.y_test = Vector(0);

  GPConfig cfg = config;
  cfg.log_variations = false;

  std::unordered_set<std::string> seen;
  std::vector<CorpusEntry> out;
  run_stdgp(cfg, prims, data, rng, [&](int, std::span<const Individual> pop) {
    for (const Individual& ind : pop) {
      if (!seen.insert(to_text(ind.tree)).second) continue;
      Vector sem = evaluate(ind.tree, sem_points);
      if (!sem.allFinite()) continue;
      out.push_back({static_cast<std::int64_t>(out.size()), problem_id, ind.tree, std::move(sem)});
    }
  });
  return out;
}

Corpus build_corpus(const CorpusConfig& config, std::uint64_t seed) {
  if (config.problems < 1) throw Error(ErrorCode::kPrecondition, "need at least one problem");
  Rng sample_rng(derive_seed(seed, 0));
  Corpus corpus(sample_standard_inputs(config.m_sem, config.n_vars, sample_rng));
  const PrimitiveSet prims{config.n_vars};

  std::vector<std::vector<CorpusEntry>> harvested(config.problems);
  parallel_for(static_cast<std::size_t>(config.problems), config.threads, [&](std::size_t p) {
    Rng rng(derive_seed(seed, p + 1));
    const SyntheticProblem problem =
        gen_synthetic_problem(config.n_vars, config.rows, config.noise_sigma, rng);
    harvested[p] = harvest_functions(problem, static_cast<int>(p), config.gp, prims,
                                     corpus.sem_points(), rng);
  });
  for (auto& entries : harvested) {
    for (auto& e : entries) {
      corpus.add_with_semantics(e.tree, e.problem_id, std::move(e.semantics));
    }
  }
  return corpus;
}

MiningResult mine_pairs(const Corpus& corpus, const MiningConfig& config) {
  if (config.k < 1) throw Error(ErrorCode::kPrecondition, "k must be >= 1");
  const std::size_t n = corpus.size();
  std::vector<std::vector<Neighbor>> neighbors(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    const auto id = static_cast<std::int64_t>(i);
    neighbors[i] = config.index != nullptr
                       ? config.index->query(corpus, corpus.at(id).semantics, config.k,
                                             config.n_probe, id)
                       : knn_neighbors(corpus, id, config.k);
  });

  MiningResult result;
  for (std::size_t i = 0; i < n; ++i) {
    const CorpusEntry& from = corpus.entries()[i];
    for (const Neighbor& nb : neighbors[i]) {
      if (!(nb.sd > 0.0 && nb.sd < config.sd_max)) continue;
      const CorpusEntry& to = corpus.at(nb.id);
      if (from.tree.size() > config.max_len || to.tree.size() > config.max_len) {
        ++result.dropped_over_length;
        continue;
      }
      result.pairs.push_back({serialize_prefix(from.tree), serialize_prefix(to.tree), nb.sd});
    }
  }
  return result;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  return in;
}

json tokens_json(std::span<const Node> nodes) {
  json arr = json::array();
  for (const Node& n : nodes) arr.push_back(token_name(n));
  return arr;
}

ExprTree tree_from_json(const json& arr) {
  return parse_prefix(arr.get<std::vector<std::string>>());
}

Vector vector_from_json(const json& arr) {
  const auto v = arr.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  auto out = open_out(path);
  for (const auto& e : corpus.entries()) {
    json j;
    j["id"] = e.id;
    j["problem_id"] = e.problem_id;
    j["tokens"] = tokens_json(e.tree.nodes());
    j["semantics"] = std::vector<double>(e.semantics.data(), e.semantics.data() + e.semantics.size());
    out << j.dump() << '\n';
  }
  auto pts = open_out(path + ".points.json");
  const Matrix& p = corpus.sem_points();
  json rows = json::array();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    std::vector<double> row(p.cols());
    for (Eigen::Index j = 0; j < p.cols(); ++j) row[j] = p(i, j);
    rows.push_back(row);
  }
  pts << json{{"m_sem", p.rows()}, {"d", p.cols()}, {"points", rows}}.dump() << '\n';
}

Corpus read_corpus_jsonl(const std::string& path) {
  json header;
  try {
    header = json::parse(open_in(path + ".points.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path + ".points.json: " + e.what());
  }
  const auto rows = header.at("points").get<std::vector<std::vector<double>>>();
  Matrix pts(static_cast<Eigen::Index>(rows.size()), header.at("d").get<Eigen::Index>());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) pts(i, j) = rows[i][j];
  }
  Corpus corpus(std::move(pts));
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      corpus.add_with_semantics(tree_from_json(j.at("tokens")), j.at("problem_id").get<int>(),
                                vector_from_json(j.at("semantics")));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

void write_pairs_jsonl(const std::vector<TrainingPair>& pairs, const std::string& path) {
  auto out = open_out(path);
  for (const auto& p : pairs) {
    json j;
    j["input"] = tokens_json(p.input);
    j["output"] = tokens_json(p.output);
    j["sd"] = p.sd;
    out << j.dump() << '\n';
  }
}

std::vector<TrainingPair> read_pairs_jsonl(const std::string& path) {
  auto in = open_in(path);
  std::vector<TrainingPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TrainingPair p;
      p.input = serialize_prefix(tree_from_json(j.at("input")));
      p.output = serialize_prefix(tree_from_json(j.at("output")));
      p.sd = j.at("sd").get<double>();
      pairs.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace tsgp
