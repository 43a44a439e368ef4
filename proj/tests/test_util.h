#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "objscale/gmm.h"
#include "objscale/simgen.h"
#include "objscale/types.h"

namespace objscale {
namespace testing {

inline std::filesystem::path DataPath(const std::string& name) {
  return std::filesystem::path(OBJSCALE_DATA_DIR) / name;
}

inline SizeVector Vec(std::initializer_list<double> values) {
  SizeVector v(static_cast<int>(values.size()));
  int i = 0;
  for (const double x : values) v(i++) = x;
  return v;
}

inline Gmm SingleGaussian(const SizeVector& mean, const SizeMatrix& cov) {
  Gmm g;
  g.dims = static_cast<int>(mean.size());
  g.weights = {1.0};
  g.means = {mean};
  g.covs = {cov};
  return g;
}

inline Gmm Gaussian1D(double mean, double sigma) {
  SizeMatrix cov(1, 1);
  cov(0, 0) = sigma * sigma;
  return SingleGaussian(Vec({mean}), cov);
}

inline PointCloud RandomCloud(std::mt19937_64& rng, size_t n, double extent = 1.0,
                              const Eigen::Vector3d& offset = Eigen::Vector3d::Zero()) {
  std::uniform_real_distribution<double> u(0, extent);
  PointCloud cloud;
  for (size_t i = 0; i < n; ++i) cloud.emplace_back(offset + Eigen::Vector3d(u(rng), u(rng), u(rng)));
  return cloud;
}

// Random rotation from three uniform Euler-style angles (not uniform on SO(3),
// which these tests do not need).
inline Eigen::Matrix3d RandomRotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  const double a = u(rng), b = u(rng), c = u(rng);
  Eigen::Matrix3d rz, ry, rx;
  rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
  rx << 1, 0, 0, 0, std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c);
  return rz * ry * rx;
}

// Solid bottle-like cylinder tilted by `angle` about the x axis; up is +z.
inline PointCloud TiltedCylinder(std::mt19937_64& rng, double angle, size_t n = 5000,
                                 double diameter = 70, double height = 250) {
  std::uniform_real_distribution<double> u(0, 1);
  const Eigen::Matrix3d tilt = Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitX()).toRotationMatrix();
  PointCloud cloud;
  while (cloud.size() < n) {
    const double x = (u(rng) - 0.5) * diameter, y = (u(rng) - 0.5) * diameter;
    if (x * x + y * y > 0.25 * diameter * diameter) continue;
    cloud.push_back(tilt * Eigen::Vector3d(x, y, u(rng) * height));
  }
  return cloud;
}

// Surface box thinned along its height with the simulator's truncation
// profile, capped at `n` points.
inline PointCloud TruncatedBoxSurface(std::mt19937_64& rng, const Eigen::Vector3d& extents,
                                      double truncation, size_t n = 5000) {
  const SampledSurface surface = SampleBoxSurface(extents, 4 * n, rng);
  std::uniform_real_distribution<double> u(0, 1);
  PointCloud kept;
  for (const auto& p : surface.points) {
    if (kept.size() == n) break;
    if (u(rng) < TruncationKeepProbability(p.z() / extents(2), truncation)) kept.push_back(p);
  }
  return kept;
}

}  // namespace testing
}  // namespace objscale
