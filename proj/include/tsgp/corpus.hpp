#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsgp/expr.hpp"
#include "tsgp/stdgp.hpp"

namespace tsgp {

/// Linear regression task with standard-normal inputs and a standardized,
/// noisy target.
struct SyntheticProblem {
  Matrix x;
  Vector w;
  Vector y;
  double noise_sigma = 0.0;
};

/// X ~ N(0, 1) (then standardized column-wise), w ~ N(0, 1),
/// y = standardize(Xw + eps) with eps ~ N(0, noise_sigma^2). m >= 10.
SyntheticProblem gen_synthetic_problem(int d, int m, double noise_sigma, Rng& rng);

/// Train/test split of a synthetic problem: first half train, second half test.
SplitData split_synthetic(const SyntheticProblem& problem);

struct CorpusEntry {
  std::int64_t id = 0;
  int problem_id = 0;
  ExprTree tree;
  Vector semantics;
};

/// Unique functions with semantics on one shared standard-normal sample.
class Corpus {
 public:
  explicit Corpus(Matrix sem_points) : sem_points_(std::move(sem_points)) {}

  const Matrix& sem_points() const { return sem_points_; }
  const std::vector<CorpusEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const CorpusEntry& at(std::int64_t id) const { return entries_.at(static_cast<std::size_t>(id)); }

  /// Adds the tree unless its canonical text is already present or its
  /// semantics are non-finite. Returns the new id when added.
  std::optional<std::int64_t> add(const ExprTree& tree, int problem_id);
  /// Adds a pre-computed entry (used when reading corpus files); ids are
  /// reassigned densely in insertion order.
  std::optional<std::int64_t> add_with_semantics(const ExprTree& tree, int problem_id,
                                                 Vector semantics);

  /// Euclidean distance between entry `id` and `query`. Every search path
  /// calls this so that exact and indexed results compare bit for bit.
  double distance(std::int64_t id, const Vector& query) const;

 private:
  Matrix sem_points_;
  std::vector<CorpusEntry> entries_;
  std::unordered_map<std::string, std::int64_t> by_text_;
};

struct Neighbor {
  std::int64_t id = 0;
  double sd = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Ordering used by every neighbor search: ascending sd, then lower id.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.sd < b.sd || (a.sd == b.sd && a.id < b.id);
}

/// Brute-force k nearest entries to `query_id`, excluding itself and any
/// candidate at distance 0.
std::vector<Neighbor> knn_neighbors(const Corpus& corpus, std::int64_t query_id, int k);

/// Brute-force search for an arbitrary vector; `exclude` is skipped.
std::vector<Neighbor> knn_search(const Corpus& corpus, const Vector& query, int k,
                                 std::optional<std::int64_t> exclude = std::nullopt);

/// Runs stdGP (double tournament) on the problem and returns every unique,
/// finite function seen in any generation, with semantics on `sem_points`.
std::vector<CorpusEntry> harvest_functions(const SyntheticProblem& problem, int problem_id,
                                           const GPConfig& config, const PrimitiveSet& prims,
                                           const Matrix& sem_points, Rng& rng);

struct TrainingPair {
  std::vector<Node> input;
  std::vector<Node> output;
  double sd = 0.0;
};

struct CorpusConfig {
  int problems = 3;
  int n_vars = 4;
  int rows = 200;
  double noise_sigma = 0.1;
  int m_sem = 100;
  GPConfig gp = [] {
    GPConfig c;
    c.pop_size = 200;
    c.generations = 15;
    c.selection = SelectionKind::kDoubleTournament;
    c.log_variations = false;
    return c;
  }();
  int threads = 1;
};

/// Full model-building front half: synthetic problems, harvesting and the
/// shared semantic sample. Problem p uses derive_seed(seed, p + 1); the
/// sample uses derive_seed(seed, 0).
Corpus build_corpus(const CorpusConfig& config, std::uint64_t seed);

class IvfIndex;

struct MiningConfig {
  int k = 3;
  double sd_max = 100.0;
  int max_len = 100;
  /// When set, neighbors come from this index with `n_probe` lists probed.
  const IvfIndex* index = nullptr;
  int n_probe = 1;
  int threads = 1;
};

struct MiningResult {
  std::vector<TrainingPair> pairs;
  std::size_t dropped_over_length = 0;
};

/// One pair (f_i -> f) per neighbor with 0 < sd < sd_max; pairs with either
/// side longer than max_len are dropped and counted.
MiningResult mine_pairs(const Corpus& corpus, const MiningConfig& config);

void write_corpus_jsonl(const Corpus& corpus, const std::string& path);
/// Reads entries plus the shared sample stored by write_corpus_jsonl in
/// `<path>.points.json`.
Corpus read_corpus_jsonl(const std::string& path);
void write_pairs_jsonl(const std::vector<TrainingPair>& pairs, const std::string& path);
std::vector<TrainingPair> read_pairs_jsonl(const std::string& path);

}  // namespace tsgp
