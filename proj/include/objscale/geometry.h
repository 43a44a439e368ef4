#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "objscale/types.h"

namespace objscale {

// Pinhole camera, no lens distortion. `rotation` maps world to camera
// coordinates (x right, y down, z forward).
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 1, height = 1;

  Eigen::Vector3d ToCamera(const Eigen::Vector3d& world) const {
    return rotation * world + translation;
  }
  Eigen::Vector3d Center() const { return -rotation.transpose() * translation; }
  // Camera axes expressed in world coordinates.
  Eigen::Vector3d RightAxis() const { return rotation.row(0).transpose(); }
  Eigen::Vector3d UpAxis() const { return -rotation.row(1).transpose(); }
  Eigen::Vector3d ForwardAxis() const { return rotation.row(2).transpose(); }

  // Pixel coordinates, or nothing for points at or behind the camera plane.
  std::optional<Eigen::Vector2d> Project(const Eigen::Vector3d& world) const;

  // Throws unless the rotation is orthonormal within 1e-9 and focal
  // lengths and image size are positive.
  void Validate() const;

  static CameraPose LookAt(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                           const Eigen::Vector3d& world_up, double fx, double fy,
                           double cx, double cy, int width, int height);
};

// Pixel index of a projected point: pixel centers sit on integer coordinates.
inline int PixelIndex(double coordinate) {
  return static_cast<int>(std::floor(coordinate + 0.5));
}

class Mask2D {
 public:
  Mask2D() = default;
  Mask2D(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  bool Contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_ &&
           bits_[static_cast<size_t>(y) * width_ + x];
  }
  void Set(int x, int y, bool value = true);
  size_t Count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<bool> bits_;
};

struct Instance {
  int instance_id = 0;
  CategoryPath category;
  PointCloud points;
};

struct FrameObservation {
  int frame_id = 0;
  CameraPose pose;
  std::vector<Instance> instances;
};

// Points that project in front of the camera, inside the image, onto a
// covered mask pixel.
PointCloud LabelPoints(const PointCloud& cloud, const CameraPose& pose, const Mask2D& mask);

// Mean nearest-neighbor distance from the smaller cloud to the larger one.
// Equal-sized clouds use the mean of both directions, so the result does not
// depend on argument order.
double CloudDistance(const PointCloud& a, const PointCloud& b);

// Mean over `from` of the distance to the nearest point of `to`.
double DirectedCloudDistance(const PointCloud& from, const PointCloud& to);

// Diagonal of the axis-aligned bounding box.
double BoundingBoxDiagonal(const PointCloud& cloud);

}  // namespace objscale
