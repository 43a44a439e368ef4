#include "objscale/dimensions.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "objscale/error.h"

namespace objscale {
namespace {

double Cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

Eigen::Vector3d EstimateUpVector(std::span<const CameraPose> poses, double eigen_gap) {
  OBJSCALE_CHECK(poses.size() >= 2, ErrorCode::kInvalidArgument,
                 "up-vector estimation needs at least two camera poses");
  Eigen::Matrix3d normal_matrix = Eigen::Matrix3d::Zero();
  Eigen::Vector3d mean_up = Eigen::Vector3d::Zero();
  for (const auto& pose : poses) {
    const Eigen::Vector3d r = pose.RightAxis();
    normal_matrix += r * r.transpose();
    mean_up += pose.UpAxis();
  }
  normal_matrix /= static_cast<double>(poses.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(normal_matrix);
  const Eigen::Vector3d values = solver.eigenvalues();
  OBJSCALE_CHECK(values(1) - values(0) >= eigen_gap, ErrorCode::kDegenerate,
                 "camera right axes do not span a plane; the vertical is ambiguous");
  Eigen::Vector3d up = solver.eigenvectors().col(0).normalized();
  if (up.dot(mean_up) < 0) up = -up;
  return up;
}

std::vector<Eigen::Vector2d> ConvexHull(std::span<const Eigen::Vector2d> points) {
  std::vector<Eigen::Vector2d> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.size() < 3) return sorted;
  std::vector<Eigen::Vector2d> hull(2 * sorted.size());
  size_t k = 0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    while (k >= 2 && Cross(hull[k - 2], hull[k - 1], sorted[i]) <= 0) --k;
    hull[k++] = sorted[i];
  }
  for (size_t i = sorted.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && Cross(hull[k - 2], hull[k - 1], sorted[i]) <= 0) --k;
    hull[k++] = sorted[i];
  }
  hull.resize(k - 1);
  return hull;
}

MinAreaRect ComputeMinAreaRect(std::span<const Eigen::Vector2d> points) {
  const std::vector<Eigen::Vector2d> hull = ConvexHull(points);
  OBJSCALE_CHECK(hull.size() >= 3, ErrorCode::kDegenerate,
                 "minimum bounding rectangle of collinear points is degenerate");
  const size_t h = hull.size();
  auto at = [&](size_t i) -> const Eigen::Vector2d& { return hull[i % h]; };

  // Caliper indices grow monotonically; they are reduced modulo h on access.
  size_t right = 1, top = 1, left = 1;
  double best_area = std::numeric_limits<double>::infinity();
  MinAreaRect best;
  for (size_t i = 0; i < h; ++i) {
    const Eigen::Vector2d& origin = at(i);
    const Eigen::Vector2d edge = (at(i + 1) - origin).normalized();
    const Eigen::Vector2d normal(-edge.y(), edge.x());
    auto along = [&](size_t j) { return (at(j) - origin).dot(edge); };
    auto above = [&](size_t j) { return (at(j) - origin).dot(normal); };

    right = std::max(right, i + 1);
    while (along(right + 1) > along(right)) ++right;
    top = std::max(top, right);
    while (above(top + 1) > above(top)) ++top;
    left = std::max(left, top);
    while (left < i + h && along(left + 1) < along(left)) ++left;

    const double lo = std::min(0.0, along(left));
    const double hi = along(right);
    const double extent_edge = hi - lo;
    const double extent_normal = above(top);
    const double area = extent_edge * extent_normal;
    if (area < best_area) {
      best_area = area;
      best.center = origin + edge * (0.5 * (lo + hi)) + normal * (0.5 * extent_normal);
      if (extent_edge >= extent_normal) {
        best.length = extent_edge;
        best.width = extent_normal;
        best.length_axis = edge;
      } else {
        best.length = extent_normal;
        best.width = extent_edge;
        best.length_axis = normal;
      }
      double angle = std::fmod(std::atan2(edge.y(), edge.x()), std::numbers::pi / 2);
      if (angle < 0) angle += std::numbers::pi / 2;
      if (angle >= std::numbers::pi / 2 - 1e-12) angle = 0;
      best.angle = angle;
    }
  }
  OBJSCALE_CHECK(best.width > 0, ErrorCode::kDegenerate,
                 "minimum bounding rectangle has zero width");
  return best;
}

double DimensionEstimate::Value(Dim dim) const {
  switch (dim) {
    case Dim::kWidth:
      return width;
    case Dim::kLength:
      return length;
    case Dim::kHeight:
      return height;
  }
  return 0;
}

double DimensionEstimate::Confidence(Dim dim) const { return confidence[AxisOf(dim)]; }

bool DimensionEstimate::Reliable(Dim dim) const { return reliable[AxisOf(dim)]; }

int AxisOf(Dim dim) {
  switch (dim) {
    case Dim::kLength:
      return 0;
    case Dim::kWidth:
      return 1;
    case Dim::kHeight:
      return 2;
  }
  return 0;
}

DimensionEstimate ExtractDimensions(const PointCloud& points, const Eigen::Vector3d& up,
                                    size_t min_points) {
  OBJSCALE_CHECK(points.size() >= min_points, ErrorCode::kInvalidArgument,
                 "dimension extraction needs at least " + std::to_string(min_points) +
                     " points, got " + std::to_string(points.size()));
  OBJSCALE_CHECK(up.allFinite() && up.norm() > 0, ErrorCode::kInvalidArgument,
                 "up vector must be finite and non-zero");
  const Eigen::Vector3d z = up.normalized();
  Eigen::Vector3d helper = Eigen::Vector3d::UnitX();
  if (std::abs(z.x()) > 0.9) helper = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d e1 = (helper - helper.dot(z) * z).normalized();
  const Eigen::Vector3d e2 = z.cross(e1);

  std::vector<Eigen::Vector2d> planar;
  planar.reserve(points.size());
  double h_lo = std::numeric_limits<double>::infinity();
  double h_hi = -h_lo;
  for (const auto& p : points) {
    planar.emplace_back(p.dot(e1), p.dot(e2));
    const double h = p.dot(z);
    h_lo = std::min(h_lo, h);
    h_hi = std::max(h_hi, h);
  }
  const MinAreaRect rect = ComputeMinAreaRect(planar);
  OBJSCALE_CHECK(h_hi > h_lo, ErrorCode::kDegenerate, "object has zero height");

  DimensionEstimate est;
  est.length = rect.length;
  est.width = rect.width;
  est.height = h_hi - h_lo;
  const Eigen::Vector3d x = (rect.length_axis.x() * e1 + rect.length_axis.y() * e2).normalized();
  const Eigen::Vector3d y = z.cross(x);
  est.axes.col(0) = x;
  est.axes.col(1) = y;
  est.axes.col(2) = z;
  est.center = rect.center.x() * e1 + rect.center.y() * e2 + 0.5 * (h_lo + h_hi) * z;
  return est;
}

long DensityGrid::Total() const {
  long total = 0;
  for (const int c : counts) total += c;
  return total;
}

DensityGrid BuildDensityGrid(const PointCloud& points, const DimensionEstimate& estimate) {
  const Eigen::Vector3d extents = estimate.Extents();
  OBJSCALE_CHECK((extents.array() > 0).all(), ErrorCode::kDegenerate,
                 "density grid needs a box with positive extents");
  DensityGrid grid;
  for (const auto& p : points) {
    const Eigen::Vector3d local = estimate.axes.transpose() * (p - estimate.center) + 0.5 * extents;
    int index[3];
    for (int a = 0; a < 3; ++a) {
      const int i = static_cast<int>(std::floor(kGridCells * local(a) / extents(a)));
      index[a] = std::clamp(i, 0, kGridCells - 1);
    }
    ++grid.at(index[0], index[1], index[2]);
  }
  return grid;
}

std::array<double, 3> ConfidenceFromGrid(const DensityGrid& grid) {
  long global_sum = 0;
  int global_cells = 0;
  for (const int c : grid.counts) {
    if (c > 0) {
      global_sum += c;
      ++global_cells;
    }
  }
  std::array<double, 3> eta = {0, 0, 0};
  if (global_cells == 0) return eta;
  const double rho_global = static_cast<double>(global_sum) / global_cells;

  auto slab_density = [&](int axis, int slab) {
    long sum = 0;
    int cells = 0;
    for (int i = 0; i < kGridCells; ++i) {
      for (int j = 0; j < kGridCells; ++j) {
        int idx[3];
        idx[axis] = slab;
        idx[(axis + 1) % 3] = i;
        idx[(axis + 2) % 3] = j;
        const int c = grid.at(idx[0], idx[1], idx[2]);
        if (c > 0) {
          sum += c;
          ++cells;
        }
      }
    }
    return cells == 0 ? 0.0 : static_cast<double>(sum) / cells;
  };
  for (int axis = 0; axis < 3; ++axis) {
    const double head = slab_density(axis, 0);
    const double tail = slab_density(axis, kGridCells - 1);
    eta[axis] = std::sqrt(head * tail) / rho_global;
  }
  return eta;
}

std::array<double, 3> DimensionConfidence(const PointCloud& points,
                                          const DimensionEstimate& estimate) {
  return ConfidenceFromGrid(BuildDensityGrid(points, estimate));
}

std::array<bool, 3> SelectReliable(const std::array<double, 3>& confidence, double threshold) {
  OBJSCALE_CHECK(threshold > 0 && threshold <= 2, ErrorCode::kInvalidArgument,
                 "confidence threshold must lie in (0, 2]");
  return {confidence[0] >= threshold, confidence[1] >= threshold, confidence[2] >= threshold};
}

DimensionEstimate MeasureObject(const PointCloud& points, const Eigen::Vector3d& up,
                                double confidence_threshold, size_t min_points) {
  DimensionEstimate est = ExtractDimensions(points, up, min_points);
  est.confidence = DimensionConfidence(points, est);
  est.reliable = SelectReliable(est.confidence, confidence_threshold);
  return est;
}

}  // namespace objscale
