#include "objscale/kdtree.h"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

#include "objscale/error.h"

namespace objscale {
namespace {

constexpr size_t kLeafSize = 12;

struct Candidate {
  double d2;
  size_t index;
  bool operator<(const Candidate& other) const {
    return d2 < other.d2 || (d2 == other.d2 && index < other.index);
  }
};

}  // namespace

KdTree::KdTree(std::span<const Eigen::Vector3d> points) : points_(points) {
  order_.resize(points.size());
  std::iota(order_.begin(), order_.end(), size_t{0});
  nodes_.reserve(2 * points.size() / kLeafSize + 2);
  if (!points.empty()) Build(0, points.size());
}

size_t KdTree::Build(size_t begin, size_t end) {
  const size_t id = nodes_.size();
  nodes_.emplace_back();
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  nodes_[id].min_index = *std::min_element(order_.begin() + begin, order_.begin() + end);
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
  Eigen::Vector3d hi = -lo;
  for (size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) <= lo(axis)) return id;  // all points coincide

  const size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](size_t a, size_t b) { return points_[a](axis) < points_[b](axis); });
  const double split = points_[order_[mid]](axis);
  const size_t left = Build(begin, mid);
  const size_t right = Build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

double KdTree::BoxDistance2(const Node& node, const Eigen::Vector3d& query) const {
  const Eigen::Vector3d below = (node.lo - query).cwiseMax(0.0);
  const Eigen::Vector3d above = (query - node.hi).cwiseMax(0.0);
  return (below + above).squaredNorm();
}

size_t KdTree::Nearest(const Eigen::Vector3d& query, double* squared_distance) const {
  OBJSCALE_CHECK(!points_.empty(), ErrorCode::kInvalidArgument,
                 "nearest-neighbor query on an empty tree");
  Candidate best{std::numeric_limits<double>::infinity(), points_.size()};
  // Explicit stack of (node, lower bound on squared distance).
  std::vector<std::pair<size_t, double>> stack;
  stack.reserve(64);
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    const Node& node = nodes_[id];
    if (bound > best.d2 || (bound == best.d2 && node.min_index > best.index)) continue;
    if (node.axis < 0) {
      for (size_t i = node.begin; i < node.end; ++i) {
        const size_t index = order_[i];
        const Candidate c{(points_[index] - query).squaredNorm(), index};
        if (c < best) best = c;
      }
      continue;
    }
    const double diff = query(node.axis) - node.split;
    const size_t near = diff < 0 ? node.left : node.right;
    const size_t far = diff < 0 ? node.right : node.left;
    stack.emplace_back(far, BoxDistance2(nodes_[far], query));
    stack.emplace_back(near, BoxDistance2(nodes_[near], query));
  }
  if (squared_distance != nullptr) *squared_distance = best.d2;
  return best.index;
}

void KdTree::KNearest(const Eigen::Vector3d& query, size_t k, std::vector<size_t>* indices,
                      std::vector<double>* squared_distances) const {
  k = std::min(k, points_.size());
  std::priority_queue<Candidate> heap;  // max-heap of the current k best
  auto worst = [&]() {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().d2;
  };
  std::vector<std::pair<size_t, double>> stack;
  stack.reserve(64);
  if (k > 0) stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    const Node& node = nodes_[id];
    const double limit = worst();
    if (bound > limit ||
        (bound == limit && heap.size() == k && node.min_index > heap.top().index)) {
      continue;
    }
    if (node.axis < 0) {
      for (size_t i = node.begin; i < node.end; ++i) {
        const size_t index = order_[i];
        const Candidate c{(points_[index] - query).squaredNorm(), index};
        if (heap.size() < k) {
          heap.push(c);
        } else if (c < heap.top()) {
          heap.pop();
          heap.push(c);
        }
      }
      continue;
    }
    const double diff = query(node.axis) - node.split;
    const size_t near = diff < 0 ? node.left : node.right;
    const size_t far = diff < 0 ? node.right : node.left;
    stack.emplace_back(far, BoxDistance2(nodes_[far], query));
    stack.emplace_back(near, BoxDistance2(nodes_[near], query));
  }
  std::vector<Candidate> sorted;
  sorted.reserve(heap.size());
  while (!heap.empty()) {
    sorted.push_back(heap.top());
    heap.pop();
  }
  std::reverse(sorted.begin(), sorted.end());
  if (indices != nullptr) {
    indices->clear();
    for (const auto& c : sorted) indices->push_back(c.index);
  }
  if (squared_distances != nullptr) {
    squared_distances->clear();
    for (const auto& c : sorted) squared_distances->push_back(c.d2);
  }
}

}  // namespace objscale
