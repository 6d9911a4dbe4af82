#include "tsgp/ivf_index.hpp"

#include <algorithm>
#include <numeric>

#include "tsgp/error.hpp"

namespace tsgp {

namespace {

std::size_t nearest_centroid(const std::vector<Vector>& centroids, const Vector& v) {
  std::size_t best = 0;
  double best_d = (centroids[0] - v).squaredNorm();
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = (centroids[c] - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

IvfIndex IvfIndex::build(const Corpus& corpus, int n_clusters, Rng& rng) {
  const std::size_t n = corpus.size();
  if (n_clusters < 1 || static_cast<std::size_t>(n_clusters) > n) {
    throw Error(ErrorCode::kPrecondition, "n_clusters must lie in [1, corpus size]");
  }
  const auto& entries = corpus.entries();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first n_clusters positions are a uniform sample.
  for (int c = 0; c < n_clusters; ++c) {
    const auto j = std::uniform_int_distribution<std::size_t>(c, n - 1)(rng);
    std::swap(order[c], order[j]);
  }

  IvfIndex index;
  index.centroids_.reserve(n_clusters);
  for (int c = 0; c < n_clusters; ++c) index.centroids_.push_back(entries[order[c]].semantics);

  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_centroid(index.centroids_, entries[i].semantics);
      if (c != assign[i]) changed = true;
      assign[i] = c;
    }
    if (!changed) break;
    std::vector<Vector> sums(n_clusters, Vector::Zero(corpus.sem_points().rows()));
    std::vector<std::size_t> counts(n_clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]] += entries[i].semantics;
      ++counts[assign[i]];
    }
    for (int c = 0; c < n_clusters; ++c) {
      // Empty clusters keep their previous centroid.
      if (counts[c] > 0) index.centroids_[c] = sums[c] / static_cast<double>(counts[c]);
    }
  }

  index.lists_.assign(n_clusters, {});
  for (std::size_t i = 0; i < n; ++i) {
    index.lists_[nearest_centroid(index.centroids_, entries[i].semantics)].push_back(
        static_cast<std::int64_t>(i));
  }
  return index;
}

std::vector<Neighbor> IvfIndex::query(const Corpus& corpus, const Vector& query, int k,
                                      int n_probe, std::optional<std::int64_t> exclude) const {
  const int probes = std::clamp(n_probe, 1, n_clusters());
  std::vector<std::pair<double, int>> by_centroid(centroids_.size());
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    by_centroid[c] = {(centroids_[c] - query).squaredNorm(), static_cast<int>(c)};
  }
  std::partial_sort(by_centroid.begin(), by_centroid.begin() + probes, by_centroid.end());

  std::vector<Neighbor> found;
  for (int p = 0; p < probes; ++p) {
    for (const std::int64_t id : lists_[by_centroid[p].second]) {
      if (exclude && *exclude == id) continue;
      const double sd = corpus.distance(id, query);
      if (sd == 0.0) continue;
      found.push_back({id, sd});
    }
  }
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), found.size());
  std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(take), found.end(),
                    neighbor_less);
  found.resize(take);
  return found;
}

}  // namespace tsgp
