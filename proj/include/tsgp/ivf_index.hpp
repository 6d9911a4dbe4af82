#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tsgp/corpus.hpp"

namespace tsgp {

/// Inverted-file index over corpus semantics. k-means partitions the
/// semantic vectors into `n_clusters` lists; a query scans only the lists of
/// the `n_probe` nearest centroids.
class IvfIndex {
 public:
  static constexpr int kMaxIterations = 25;

  /// Requires 1 <= n_clusters <= corpus.size(). Centroids start at distinct
  /// uniformly sampled entries.
  static IvfIndex build(const Corpus& corpus, int n_clusters, Rng& rng);

  /// Same contract as knn_search, restricted to the probed lists.
  std::vector<Neighbor> query(const Corpus& corpus, const Vector& query, int k, int n_probe,
                              std::optional<std::int64_t> exclude = std::nullopt) const;

  int n_clusters() const { return static_cast<int>(centroids_.size()); }
  const std::vector<std::vector<std::int64_t>>& lists() const { return lists_; }

 private:
  std::vector<Vector> centroids_;
  std::vector<std::vector<std::int64_t>> lists_;
};

}  // namespace tsgp
