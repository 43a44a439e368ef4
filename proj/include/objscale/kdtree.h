#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace objscale {

// Static 3D k-d tree over a borrowed point array. Queries are exact: ties in
// distance resolve to the lower point index, matching a brute-force scan.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points);

  size_t size() const { return points_.size(); }

  // Index of the nearest point and its squared distance.
  size_t Nearest(const Eigen::Vector3d& query, double* squared_distance) const;

  // The k nearest points ordered by (squared distance, index).
  void KNearest(const Eigen::Vector3d& query, size_t k, std::vector<size_t>* indices,
                std::vector<double>* squared_distances) const;

 private:
  struct Node {
    // Leaf when axis < 0; children are nodes_[left], nodes_[right].
    int axis = -1;
    double split = 0;
    size_t begin = 0, end = 0;
    size_t left = 0, right = 0;
    // Smallest point index in the subtree, for exact tie pruning.
    size_t min_index = 0;
    Eigen::Vector3d lo = Eigen::Vector3d::Zero(), hi = Eigen::Vector3d::Zero();
  };

  double BoxDistance2(const Node& node, const Eigen::Vector3d& query) const;

  size_t Build(size_t begin, size_t end);

  std::span<const Eigen::Vector3d> points_;
  std::vector<size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace objscale
