#include "objscale/outliers.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "objscale/error.h"
#include "objscale/kdtree.h"

namespace objscale {
namespace {

constexpr double kEulerGamma = 0.5772156649015329;

// Isolation tree stored as a flat node array.
class IsolationTree {
 public:
  IsolationTree(const PointCloud& cloud, std::vector<size_t> sample, int height_limit,
                std::mt19937_64& rng) {
    Grow(cloud, sample, 0, height_limit, rng);
  }

  double PathLength(const Eigen::Vector3d& p) const {
    size_t id = 0;
    int depth = 0;
    while (nodes_[id].axis >= 0) {
      const Node& n = nodes_[id];
      id = p(n.axis) < n.split ? n.left : n.right;
      ++depth;
    }
    return depth + AveragePathLength(static_cast<double>(nodes_[id].size));
  }

 private:
  struct Node {
    int axis = -1;
    double split = 0;
    size_t left = 0, right = 0;
    size_t size = 0;
  };

  size_t Grow(const PointCloud& cloud, std::vector<size_t>& items, int depth, int limit,
              std::mt19937_64& rng) {
    const size_t id = nodes_.size();
    nodes_.emplace_back();
    nodes_[id].size = items.size();
    if (depth >= limit || items.size() <= 1) return id;

    Eigen::Vector3d lo = cloud[items.front()], hi = lo;
    for (const size_t i : items) {
      lo = lo.cwiseMin(cloud[i]);
      hi = hi.cwiseMax(cloud[i]);
    }
    std::vector<int> axes;
    for (int a = 0; a < 3; ++a) {
      if (hi(a) > lo(a)) axes.push_back(a);
    }
    if (axes.empty()) return id;
    std::uniform_int_distribution<size_t> pick_axis(0, axes.size() - 1);
    const int axis = axes[pick_axis(rng)];
    std::uniform_real_distribution<double> pick_split(lo(axis), hi(axis));
    double split = pick_split(rng);
    if (split <= lo(axis)) split = std::nextafter(lo(axis), hi(axis));

    std::vector<size_t> left, right;
    for (const size_t i : items) (cloud[i](axis) < split ? left : right).push_back(i);
    items.clear();
    items.shrink_to_fit();
    const size_t l = Grow(cloud, left, depth + 1, limit, rng);
    const size_t r = Grow(cloud, right, depth + 1, limit, rng);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Node> nodes_;
};

PointCloud KeepIndices(const PointCloud& cloud, const std::vector<bool>& keep) {
  PointCloud out;
  out.reserve(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    if (keep[i]) out.push_back(cloud[i]);
  }
  return out;
}

}  // namespace

double AveragePathLength(double n) {
  if (n <= 1) return 0;
  if (n == 2) return 1;
  return 2.0 * (std::log(n - 1.0) + kEulerGamma) - 2.0 * (n - 1.0) / n;
}

std::vector<double> MeanNeighborDistances(const PointCloud& cloud, int k) {
  OBJSCALE_CHECK(k >= 1, ErrorCode::kInvalidArgument, "k must be positive");
  OBJSCALE_CHECK(cloud.size() > static_cast<size_t>(k), ErrorCode::kInvalidArgument,
                 "knn outlier removal needs more than k points");
  const KdTree tree(cloud);
  std::vector<double> mean_distance(cloud.size());
  std::vector<size_t> indices;
  std::vector<double> d2;
  for (size_t i = 0; i < cloud.size(); ++i) {
    tree.KNearest(cloud[i], static_cast<size_t>(k) + 1, &indices, &d2);
    double sum = 0;
    int used = 0;
    for (size_t j = 0; j < indices.size() && used < k; ++j) {
      if (indices[j] == i) continue;
      sum += std::sqrt(d2[j]);
      ++used;
    }
    mean_distance[i] = sum / used;
  }
  return mean_distance;
}

PointCloud RemoveOutliersKnn(const PointCloud& cloud, const KnnOutlierOptions& options) {
  const std::vector<double> stat = MeanNeighborDistances(cloud, options.k);
  const double n = static_cast<double>(stat.size());
  const double mean = std::accumulate(stat.begin(), stat.end(), 0.0) / n;
  double var = 0;
  for (const double s : stat) var += (s - mean) * (s - mean);
  const double stddev = std::sqrt(var / n);
  const double limit = mean + options.stddev_mult * stddev;
  std::vector<bool> keep(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) keep[i] = stat[i] <= limit;
  return KeepIndices(cloud, keep);
}

std::vector<double> IsolationForestScores(const PointCloud& cloud,
                                          const IsolationForestOptions& options) {
  OBJSCALE_CHECK(options.n_trees >= 1, ErrorCode::kInvalidArgument,
                 "isolation forest needs at least one tree");
  OBJSCALE_CHECK(options.subsample >= 2, ErrorCode::kInvalidArgument,
                 "isolation forest subsample must be at least 2");
  OBJSCALE_CHECK(cloud.size() >= static_cast<size_t>(options.subsample),
                 ErrorCode::kInvalidArgument,
                 "isolation forest needs at least `subsample` points");
  const int height_limit =
      static_cast<int>(std::ceil(std::log2(static_cast<double>(options.subsample))));
  std::mt19937_64 rng(options.seed);
  std::vector<size_t> all(cloud.size());
  std::iota(all.begin(), all.end(), size_t{0});

  std::vector<double> path_sum(cloud.size(), 0.0);
  for (int t = 0; t < options.n_trees; ++t) {
    // Partial Fisher-Yates draw of a subsample without replacement.
    for (int i = 0; i < options.subsample; ++i) {
      std::uniform_int_distribution<size_t> pick(static_cast<size_t>(i), all.size() - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    std::vector<size_t> sample(all.begin(), all.begin() + options.subsample);
    const IsolationTree tree(cloud, std::move(sample), height_limit, rng);
    for (size_t i = 0; i < cloud.size(); ++i) path_sum[i] += tree.PathLength(cloud[i]);
  }
  const double c = AveragePathLength(options.subsample);
  std::vector<double> scores(cloud.size());
  for (size_t i = 0; i < cloud.size(); ++i) {
    scores[i] = std::pow(2.0, -(path_sum[i] / options.n_trees) / c);
  }
  return scores;
}

PointCloud RemoveOutliersIForest(const PointCloud& cloud,
                                 const IsolationForestOptions& options) {
  OBJSCALE_CHECK(options.contamination >= 0 && options.contamination < 0.5,
                 ErrorCode::kInvalidArgument, "contamination must lie in [0, 0.5)");
  OBJSCALE_CHECK(cloud.size() >= static_cast<size_t>(options.subsample),
                 ErrorCode::kInvalidArgument,
                 "isolation forest needs at least `subsample` points");
  const size_t remove =
      static_cast<size_t>(std::floor(options.contamination * static_cast<double>(cloud.size())));
  if (remove == 0) return cloud;
  const std::vector<double> scores = IsolationForestScores(cloud, options);
  std::vector<size_t> order(cloud.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> keep(cloud.size(), true);
  for (size_t i = 0; i < remove; ++i) keep[order[i]] = false;
  return KeepIndices(cloud, keep);
}

}  // namespace objscale
