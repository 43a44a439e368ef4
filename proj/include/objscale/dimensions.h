#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "objscale/geometry.h"
#include "objscale/types.h"

namespace objscale {

constexpr double kDefaultEigenGap = 1e-6;
constexpr double kDefaultConfidenceThreshold = 0.7;
constexpr int kGridCells = 8;

// Scene vertical from camera right axes: the eigenvector of R^T R with the
// smallest eigenvalue, R stacking the right axes as rows. The sign agrees with
// the mean camera up axis. Throws kDegenerate when the two smallest
// eigenvalues of R^T R / n are closer than `eigen_gap`.
Eigen::Vector3d EstimateUpVector(std::span<const CameraPose> poses,
                                 double eigen_gap = kDefaultEigenGap);

std::vector<Eigen::Vector2d> ConvexHull(std::span<const Eigen::Vector2d> points);

struct MinAreaRect {
  double length = 0;  // >= width
  double width = 0;
  double angle = 0;   // rectangle edge direction modulo pi/2, in [0, pi/2)
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d length_axis = Eigen::Vector2d::UnitX();
};

// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
MinAreaRect ComputeMinAreaRect(std::span<const Eigen::Vector2d> points);

// Oriented size of an object. axes.col(0) runs along length, col(1) along
// width and col(2) along height; confidence is indexed the same way.
struct DimensionEstimate {
  double length = 0;
  double width = 0;
  double height = 0;
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  std::array<double, 3> confidence = {0, 0, 0};
  std::array<bool, 3> reliable = {false, false, false};

  double Value(Dim dim) const;
  double Confidence(Dim dim) const;
  bool Reliable(Dim dim) const;
  Eigen::Vector3d Extents() const { return {length, width, height}; }
};

// Box axis carrying a size dimension: length -> 0, width -> 1, height -> 2.
int AxisOf(Dim dim);

// Height is the extent along `up`; length and width come from the
// minimum-area rectangle of the points projected onto the plane normal to
// `up`. Confidence fields are left zero.
DimensionEstimate ExtractDimensions(const PointCloud& points, const Eigen::Vector3d& up,
                                    size_t min_points = 50);

// 8x8x8 point counts over the oriented box, indexed [x][y][z] with x along
// length, y along width, z along height.
struct DensityGrid {
  std::array<int, kGridCells * kGridCells * kGridCells> counts{};

  int& at(int x, int y, int z) { return counts[(x * kGridCells + y) * kGridCells + z]; }
  int at(int x, int y, int z) const { return counts[(x * kGridCells + y) * kGridCells + z]; }
  long Total() const;
};

DensityGrid BuildDensityGrid(const PointCloud& points, const DimensionEstimate& estimate);

// eta_a = sqrt(rho_head * rho_tail) / rho_global per box axis, densities being
// mean counts over the non-empty cells of the whole grid and of the two
// boundary slabs. A slab without points has density 0.
std::array<double, 3> ConfidenceFromGrid(const DensityGrid& grid);

std::array<double, 3> DimensionConfidence(const PointCloud& points,
                                          const DimensionEstimate& estimate);

std::array<bool, 3> SelectReliable(const std::array<double, 3>& confidence, double threshold);

// Extraction plus confidence and reliability flags.
DimensionEstimate MeasureObject(const PointCloud& points, const Eigen::Vector3d& up,
                                double confidence_threshold = kDefaultConfidenceThreshold,
                                size_t min_points = 50);

}  // namespace objscale
