#include "objscale/geometry.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "objscale/error.h"
#include "objscale/kdtree.h"

namespace objscale {

std::optional<Eigen::Vector2d> CameraPose::Project(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d c = ToCamera(world);
  if (!(c.z() > 0)) return std::nullopt;
  return Eigen::Vector2d(fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy);
}

void CameraPose::Validate() const {
  OBJSCALE_CHECK(rotation.allFinite() && translation.allFinite(),
                 ErrorCode::kInvalidArgument, "camera pose must be finite");
  const double err =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  OBJSCALE_CHECK(err <= 1e-9, ErrorCode::kInvalidArgument,
                 "camera rotation is not orthonormal");
  OBJSCALE_CHECK(fx > 0 && fy > 0, ErrorCode::kInvalidArgument,
                 "focal lengths must be positive");
  OBJSCALE_CHECK(width > 0 && height > 0, ErrorCode::kInvalidArgument,
                 "image size must be positive");
}

CameraPose CameraPose::LookAt(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                              const Eigen::Vector3d& world_up, double fx, double fy,
                              double cx, double cy, int width, int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  const Eigen::Vector3d right = forward.cross(world_up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraPose pose;
  pose.rotation.row(0) = right.transpose();
  pose.rotation.row(1) = down.transpose();
  pose.rotation.row(2) = forward.transpose();
  pose.translation = -pose.rotation * eye;
  pose.fx = fx;
  pose.fy = fy;
  pose.cx = cx;
  pose.cy = cy;
  pose.width = width;
  pose.height = height;
  return pose;
}

Mask2D::Mask2D(int width, int height)
    : width_(width), height_(height), bits_(static_cast<size_t>(width) * height, false) {
  OBJSCALE_CHECK(width >= 0 && height >= 0, ErrorCode::kInvalidArgument,
                 "mask size must be non-negative");
}

void Mask2D::Set(int x, int y, bool value) {
  OBJSCALE_CHECK(x >= 0 && y >= 0 && x < width_ && y < height_,
                 ErrorCode::kInvalidArgument, "mask pixel out of range");
  bits_[static_cast<size_t>(y) * width_ + x] = value;
}

size_t Mask2D::Count() const { return std::count(bits_.begin(), bits_.end(), true); }

PointCloud LabelPoints(const PointCloud& cloud, const CameraPose& pose, const Mask2D& mask) {
  OBJSCALE_CHECK(!cloud.empty(), ErrorCode::kInvalidArgument, "label_points on an empty cloud");
  PointCloud out;
  for (const auto& p : cloud) {
    const auto pixel = pose.Project(p);
    if (!pixel) continue;
    const int x = PixelIndex(pixel->x());
    const int y = PixelIndex(pixel->y());
    if (x < 0 || y < 0 || x >= pose.width || y >= pose.height) continue;
    if (mask.Contains(x, y)) out.push_back(p);
  }
  return out;
}

double DirectedCloudDistance(const PointCloud& from, const PointCloud& to) {
  OBJSCALE_CHECK(!from.empty() && !to.empty(), ErrorCode::kInvalidArgument,
                 "cloud distance needs non-empty clouds");
  const KdTree tree(to);
  double sum = 0;
  for (const auto& p : from) {
    double d2 = 0;
    tree.Nearest(p, &d2);
    sum += std::sqrt(d2);
  }
  return sum / static_cast<double>(from.size());
}

double CloudDistance(const PointCloud& a, const PointCloud& b) {
  OBJSCALE_CHECK(!a.empty() && !b.empty(), ErrorCode::kInvalidArgument,
                 "cloud distance needs non-empty clouds");
  if (a.size() < b.size()) return DirectedCloudDistance(a, b);
  if (b.size() < a.size()) return DirectedCloudDistance(b, a);
  return 0.5 * (DirectedCloudDistance(a, b) + DirectedCloudDistance(b, a));
}

double BoundingBoxDiagonal(const PointCloud& cloud) {
  if (cloud.empty()) return 0;
  Eigen::Vector3d lo = cloud.front(), hi = cloud.front();
  for (const auto& p : cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

}  // namespace objscale
