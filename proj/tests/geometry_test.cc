#include "objscale/geometry.h"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "objscale/error.h"
#include "objscale/kdtree.h"
#include "oracles.h"
#include "test_util.h"

namespace objscale {
namespace {

CameraPose SimplePose() {
  CameraPose pose;
  pose.fx = pose.fy = 100;
  pose.cx = 49.5;
  pose.cy = 39.5;
  pose.width = 100;
  pose.height = 80;
  return pose;
}

TEST(LabelPoints, OpticalAxisPointIncluded) {
  CameraPose pose = SimplePose();
  pose.cx = 50;
  pose.cy = 40;
  Mask2D mask(pose.width, pose.height);
  mask.Set(50, 40);
  const PointCloud cloud = {{0, 0, 1}};
  EXPECT_EQ(LabelPoints(cloud, pose, mask).size(), 1u);
}

TEST(LabelPoints, PointBehindCameraExcluded) {
  const CameraPose pose = SimplePose();
  Mask2D mask(pose.width, pose.height);
  for (int y = 0; y < pose.height; ++y) {
    for (int x = 0; x < pose.width; ++x) mask.Set(x, y);
  }
  const PointCloud cloud = {{0, 0, -1}, {0, 0, 0}, {0, 0, 2}};
  const PointCloud labeled = LabelPoints(cloud, pose, mask);
  ASSERT_EQ(labeled.size(), 1u);
  EXPECT_EQ(labeled[0], Eigen::Vector3d(0, 0, 2));
}

TEST(LabelPoints, MatchesPerPointProjection) {
  std::mt19937_64 rng(3);
  CameraPose pose = SimplePose();
  pose.rotation = testing::RandomRotation(rng);
  pose.translation = Eigen::Vector3d(0.1, -0.2, 0.3);
  Mask2D mask(pose.width, pose.height);
  std::bernoulli_distribution coin(0.4);
  for (int y = 0; y < pose.height; ++y) {
    for (int x = 0; x < pose.width; ++x) {
      if (coin(rng)) mask.Set(x, y);
    }
  }
  std::uniform_real_distribution<double> u(-3, 3);
  PointCloud cloud;
  for (int i = 0; i < 5000; ++i) cloud.emplace_back(u(rng), u(rng), u(rng));

  PointCloud expected;
  for (const auto& p : cloud) {
    const Eigen::Matrix3d& r = pose.rotation;
    const Eigen::Vector3d c = r * p + pose.translation;
    if (c.z() <= 0) continue;
    const double px = pose.fx * c.x() / c.z() + pose.cx;
    const double py = pose.fy * c.y() / c.z() + pose.cy;
    const int ix = static_cast<int>(std::floor(px + 0.5));
    const int iy = static_cast<int>(std::floor(py + 0.5));
    if (ix < 0 || iy < 0 || ix >= pose.width || iy >= pose.height) continue;
    if (mask.Contains(ix, iy)) expected.push_back(p);
  }
  const PointCloud labeled = LabelPoints(cloud, pose, mask);
  EXPECT_GT(expected.size(), 50u);
  EXPECT_EQ(labeled, expected);
}

TEST(CameraPose, ValidateRejectsNonOrthonormal) {
  CameraPose pose = SimplePose();
  EXPECT_NO_THROW(pose.Validate());
  pose.rotation(0, 0) = 1.001;
  EXPECT_THROW(pose.Validate(), Error);
  pose = SimplePose();
  pose.fx = 0;
  EXPECT_THROW(pose.Validate(), Error);
}

TEST(CameraPose, LookAtAxes) {
  const CameraPose pose = CameraPose::LookAt({5, 0, 2}, {0, 0, 0}, {0, 0, 1}, 100, 100, 50, 40,
                                             100, 80);
  EXPECT_NO_THROW(pose.Validate());
  EXPECT_NEAR(pose.RightAxis().z(), 0, 1e-12);  // zero roll
  EXPECT_GT(pose.UpAxis().z(), 0);
  const auto center = pose.Project({0, 0, 0});
  ASSERT_TRUE(center.has_value());
  EXPECT_NEAR(center->x(), 50, 1e-9);
  EXPECT_NEAR(center->y(), 40, 1e-9);
}

TEST(CloudDistance, IdenticalCloudsAreZero) {
  std::mt19937_64 rng(1);
  const PointCloud a = testing::RandomCloud(rng, 300);
  EXPECT_EQ(CloudDistance(a, a), 0.0);
}

TEST(CloudDistance, SinglePointExample) {
  const PointCloud a = {{0, 0, 0}};
  const PointCloud b = {{1, 0, 0}, {3, 0, 0}};
  EXPECT_DOUBLE_EQ(CloudDistance(a, b), 1.0);
  EXPECT_DOUBLE_EQ(CloudDistance(b, a), 1.0);
}

TEST(CloudDistance, EmptyInputThrows) {
  EXPECT_THROW(CloudDistance({}, {{0, 0, 0}}), Error);
}

TEST(CloudDistance, MatchesBruteForce) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(50, 250);
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud a = testing::RandomCloud(rng, size(rng));
    const PointCloud b = testing::RandomCloud(rng, size(rng), 1.5, {0.3, 0.2, -0.1});
    EXPECT_NEAR(CloudDistance(a, b), testing::BruteForceCloudDistance(a, b), 1e-12);
  }
}

TEST(CloudDistance, SymmetricAndRigidInvariant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud a = testing::RandomCloud(rng, 200);
    const PointCloud b = testing::RandomCloud(rng, trial % 2 == 0 ? 200 : 150, 2.0);
    EXPECT_EQ(CloudDistance(a, b), CloudDistance(b, a));
    const Eigen::Matrix3d r = testing::RandomRotation(rng);
    const Eigen::Vector3d t(1.5, -2, 0.25);
    PointCloud ra, rb;
    for (const auto& p : a) ra.push_back(r * p + t);
    for (const auto& p : b) rb.push_back(r * p + t);
    EXPECT_NEAR(CloudDistance(ra, rb), CloudDistance(a, b), 1e-9);
    EXPECT_GE(CloudDistance(a, b), 0.0);
  }
}

TEST(KdTree, NearestAndKNearestMatchBruteForce) {
  std::mt19937_64 rng(9);
  PointCloud cloud = testing::RandomCloud(rng, 2000);
  // Exact duplicates exercise the lowest-index tie rule.
  for (int i = 0; i < 200; ++i) cloud.push_back(cloud[static_cast<size_t>(i) * 3]);
  const KdTree tree(cloud);
  const PointCloud queries = testing::RandomCloud(rng, 300, 1.4, {-0.2, -0.2, -0.2});
  std::vector<Eigen::Vector3d> all = queries;
  all.insert(all.end(), cloud.begin(), cloud.begin() + 100);
  for (const auto& q : all) {
    std::vector<std::pair<double, size_t>> brute;
    for (size_t i = 0; i < cloud.size(); ++i) brute.emplace_back((cloud[i] - q).squaredNorm(), i);
    std::sort(brute.begin(), brute.end());
    double d2 = 0;
    EXPECT_EQ(tree.Nearest(q, &d2), brute[0].second);
    EXPECT_EQ(d2, brute[0].first);
    std::vector<size_t> idx;
    std::vector<double> dist;
    tree.KNearest(q, 10, &idx, &dist);
    ASSERT_EQ(idx.size(), 10u);
    for (size_t k = 0; k < 10; ++k) {
      EXPECT_EQ(idx[k], brute[k].second);
      EXPECT_EQ(dist[k], brute[k].first);
    }
  }
}

TEST(BoundingBoxDiagonal, UnitCube) {
  const PointCloud cube = {{0, 0, 0}, {1, 1, 1}, {0.5, 0.2, 0.9}};
  EXPECT_DOUBLE_EQ(BoundingBoxDiagonal(cube), std::sqrt(3.0));
}

}  // namespace
}  // namespace objscale
