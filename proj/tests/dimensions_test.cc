#include "objscale/dimensions.h"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "objscale/error.h"
#include "objscale/simgen.h"
#include "oracles.h"
#include "test_util.h"

namespace objscale {
namespace {

CameraPose PoseWithAxes(const Eigen::Vector3d& right, const Eigen::Vector3d& down) {
  CameraPose pose;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = right.cross(down);
  return pose;
}

TEST(UpVector, TwoSpanningAxes) {
  const std::vector<CameraPose> poses = {PoseWithAxes({1, 0, 0}, {0, 0, -1}),
                                         PoseWithAxes({0, 1, 0}, {0, 0, -1})};
  const Eigen::Vector3d up = EstimateUpVector(poses);
  EXPECT_NEAR((up - Eigen::Vector3d::UnitZ()).norm(), 0, 1e-12);
}

TEST(UpVector, SignFollowsCameraUp) {
  const std::vector<CameraPose> poses = {PoseWithAxes({1, 0, 0}, {0, 0, 1}),
                                         PoseWithAxes({0, 1, 0}, {0, 0, 1})};
  EXPECT_NEAR((EstimateUpVector(poses) + Eigen::Vector3d::UnitZ()).norm(), 0, 1e-12);
}

TEST(UpVector, ParallelAxesAreDegenerate) {
  const std::vector<CameraPose> poses = {PoseWithAxes({1, 0, 0}, {0, 0, -1}),
                                         PoseWithAxes({1, 0, 0}, {0, 1, 0})};
  try {
    EstimateUpVector(poses);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerate);
  }
  EXPECT_THROW(EstimateUpVector(std::vector<CameraPose>(1)), Error);
}

TEST(UpVector, NoisyHorizontalAxesMatchSvd) {
  std::mt19937_64 rng(1);
  for (int set = 0; set < 20; ++set) {
    const auto poses = testing::NoisyLevelPoses(rng, 50, 0.01);
    const Eigen::Vector3d up = EstimateUpVector(poses);
    EXPECT_LE(testing::AngleBetween(up, testing::UpVectorOracle(poses)), 1e-6);
    EXPECT_LE(testing::AngleBetween(up, Eigen::Vector3d::UnitZ()), M_PI / 180);
  }
}

TEST(MinAreaRect, UnitSquare) {
  const std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const MinAreaRect rect = ComputeMinAreaRect(pts);
  EXPECT_NEAR(rect.length, 1, 1e-12);
  EXPECT_NEAR(rect.width, 1, 1e-12);
  EXPECT_NEAR(rect.angle, 0, 1e-12);
  EXPECT_NEAR((rect.center - Eigen::Vector2d(0.5, 0.5)).norm(), 0, 1e-12);
}

TEST(MinAreaRect, RotatedSquareIsNotInflated) {
  const double c = std::sqrt(0.5);
  const std::vector<Eigen::Vector2d> pts = {{0, 0}, {c, c}, {0, 2 * c}, {-c, c}};
  const MinAreaRect rect = ComputeMinAreaRect(pts);
  EXPECT_NEAR(rect.length, 1, 1e-12);
  EXPECT_NEAR(rect.width, 1, 1e-12);
  EXPECT_NEAR(rect.angle, std::numbers::pi / 4, 1e-12);
}

TEST(MinAreaRect, CollinearIsDegenerate) {
  const std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  EXPECT_THROW(ComputeMinAreaRect(pts), Error);
}

TEST(MinAreaRect, MatchesEdgeDirectionSweep) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = testing::RandomPlanarPoints(rng, 40);
    const MinAreaRect rect = ComputeMinAreaRect(pts);
    const double oracle = testing::MinRectAreaOracle(pts);
    EXPECT_NEAR(rect.length * rect.width / oracle, 1.0, 1e-9);
    EXPECT_GE(rect.length, rect.width);
    EXPECT_GE(rect.angle, 0);
    EXPECT_LT(rect.angle, std::numbers::pi / 2);
  }
}

TEST(MinAreaRect, NeverLargerThanAxisAlignedBox) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pts = testing::RandomPlanarPoints(rng, 25);
    Eigen::Vector2d lo = pts[0], hi = pts[0];
    for (const auto& p : pts) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const MinAreaRect rect = ComputeMinAreaRect(pts);
    EXPECT_LE(rect.length * rect.width, (hi - lo).prod() * (1 + 1e-12));
  }
}

PointCloud BoxGrid(double lx, double ly, double lz, double spacing = 0.1) {
  PointCloud cloud;
  const int nx = static_cast<int>(std::lround(lx / spacing));
  const int ny = static_cast<int>(std::lround(ly / spacing));
  const int nz = static_cast<int>(std::lround(lz / spacing));
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      for (int k = 0; k <= nz; ++k) cloud.emplace_back(i * lx / nx, j * ly / ny, k * lz / nz);
    }
  }
  return cloud;
}

TEST(ExtractDimensions, AxisAlignedBox) {
  const PointCloud box = BoxGrid(2, 1, 3);
  for (const Eigen::Vector3d up : {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, -1)}) {
    const DimensionEstimate est = ExtractDimensions(box, up);
    EXPECT_NEAR(est.width, 1, 1e-12);
    EXPECT_NEAR(est.length, 2, 1e-12);
    EXPECT_NEAR(est.height, 3, 1e-12);
    EXPECT_NEAR((est.axes.transpose() * est.axes - Eigen::Matrix3d::Identity()).norm(), 0, 1e-9);
    EXPECT_NEAR(est.axes.determinant(), 1, 1e-9);
    EXPECT_NEAR(std::abs(est.axes.col(0).x()), 1, 1e-9);
    EXPECT_NEAR((est.center - Eigen::Vector3d(1, 0.5, 1.5)).norm(), 0, 1e-9);
  }
}

TEST(ExtractDimensions, TooFewPoints) {
  std::mt19937_64 rng(4);
  EXPECT_THROW(ExtractDimensions(testing::RandomCloud(rng, 49), Eigen::Vector3d::UnitZ()), Error);
}

TEST(ExtractDimensions, RotationAboutUpLeavesDimsUnchanged) {
  std::mt19937_64 rng(5);
  const Eigen::Vector3d up = Eigen::Vector3d(0.2, -0.3, 1).normalized();
  const PointCloud cloud = testing::RandomCloud(rng, 500, 2.0);
  const DimensionEstimate ref = ExtractDimensions(cloud, up);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(angle(rng), up).toRotationMatrix();
    PointCloud rotated;
    for (const auto& p : cloud) rotated.push_back(r * p);
    const DimensionEstimate est = ExtractDimensions(rotated, up);
    EXPECT_NEAR(est.width, ref.width, 1e-9);
    EXPECT_NEAR(est.length, ref.length, 1e-9);
    EXPECT_NEAR(est.height, ref.height, 1e-9);
  }
}

TEST(ExtractDimensions, SampledBottleWithinTwoPercent) {
  std::mt19937_64 rng(6);
  const double diameter = 70, height = 250, scale = 40;
  const SampledSurface bottle = SampleCylinderSurface(diameter, height, 5000, rng);
  const Eigen::Matrix3d world = testing::RandomRotation(rng);
  PointCloud cloud;
  for (const auto& p : bottle.points) cloud.push_back(world * p / scale);
  const DimensionEstimate est = ExtractDimensions(cloud, world.col(2));
  EXPECT_NEAR(est.width * scale / diameter, 1, 0.02);
  EXPECT_NEAR(est.length * scale / diameter, 1, 0.02);
  EXPECT_NEAR(est.height * scale / height, 1, 0.02);
}

// eta_a computed directly from the slab and global averages.
double EtaOracle(const DensityGrid& grid, int axis) {
  double total = 0, cells = 0;
  double head = 0, head_cells = 0, tail = 0, tail_cells = 0;
  for (int x = 0; x < kGridCells; ++x) {
    for (int y = 0; y < kGridCells; ++y) {
      for (int z = 0; z < kGridCells; ++z) {
        const int c = grid.at(x, y, z);
        if (c == 0) continue;
        const int idx[3] = {x, y, z};
        total += c;
        cells += 1;
        if (idx[axis] == 0) head += c, head_cells += 1;
        if (idx[axis] == kGridCells - 1) tail += c, tail_cells += 1;
      }
    }
  }
  const double rho_head = head_cells ? head / head_cells : 0;
  const double rho_tail = tail_cells ? tail / tail_cells : 0;
  return std::sqrt(rho_head * rho_tail) / (total / cells);
}

TEST(Confidence, UniformGridIsOne) {
  DensityGrid grid;
  grid.counts.fill(5);
  for (const double eta : ConfidenceFromGrid(grid)) EXPECT_EQ(eta, 1.0);
}

TEST(Confidence, HalfDensityTail) {
  // Head slab at the global mean, tail slab at half of it.
  DensityGrid grid;
  for (int x = 0; x < kGridCells; ++x) {
    for (int y = 0; y < kGridCells; ++y) {
      for (int z = 0; z < kGridCells; ++z) {
        grid.at(x, y, z) = x == 0 ? 12 : x == kGridCells - 1 ? 6 : 13;
      }
    }
  }
  const auto eta = ConfidenceFromGrid(grid);
  EXPECT_NEAR(eta[0], std::sqrt(0.5), 1e-15);
  for (int axis = 0; axis < 3; ++axis) EXPECT_NEAR(eta[axis], EtaOracle(grid, axis), 1e-15);
}

TEST(Confidence, EmptySlabGivesZero) {
  DensityGrid grid;
  for (int x = 0; x < kGridCells - 1; ++x) grid.at(x, 3, 3) = 2;
  const auto eta = ConfidenceFromGrid(grid);
  EXPECT_EQ(eta[0], 0.0);
  EXPECT_EQ(eta[1], 0.0);
}

TEST(Confidence, RandomGridsMatchOracle) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> count(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    DensityGrid grid;
    for (auto& c : grid.counts) c = count(rng);
    const auto eta = ConfidenceFromGrid(grid);
    for (int axis = 0; axis < 3; ++axis) EXPECT_NEAR(eta[axis], EtaOracle(grid, axis), 1e-14);
  }
}

TEST(Confidence, GridConservesPoints) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud cloud = testing::RandomCloud(rng, 300 + 100 * trial, 1.0 + trial);
    const DimensionEstimate est = ExtractDimensions(cloud, Eigen::Vector3d::UnitZ());
    EXPECT_EQ(BuildDensityGrid(cloud, est).Total(), static_cast<long>(cloud.size()));
  }
}

TEST(Confidence, ScaleInvariant) {
  std::mt19937_64 rng(9);
  const SampledSurface box = SampleBoxSurface({3, 2, 1}, 4000, rng);
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  const DimensionEstimate ref = MeasureObject(box.points, up);
  for (const double c : {0.001, 0.37, 2.0, 13.1, 1e4}) {
    PointCloud scaled;
    for (const auto& p : box.points) scaled.push_back(c * p);
    const DimensionEstimate est = MeasureObject(scaled, up);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(est.confidence[a], ref.confidence[a], 1e-9) << c;
  }
}

TEST(Confidence, TruncationLowersHeightConfidence) {
  std::mt19937_64 rng(10);
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  // Solid box kept on its original grid: the cut empties the top slab.
  const PointCloud solid = testing::RandomCloud(rng, 8000);
  const DimensionEstimate box = MeasureObject(solid, up);
  PointCloud cut;
  for (const auto& p : solid) {
    if (p.z() <= 0.6) cut.push_back(p);
  }
  EXPECT_LT(DimensionConfidence(cut, box)[2], box.confidence[2]);

  // Re-measured surface boxes under growing truncation of the height.
  std::uniform_real_distribution<double> side(0.3, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d extents(side(rng), side(rng), side(rng));
    double previous = std::numeric_limits<double>::infinity();
    for (const double t : {0.0, 0.2, 0.4}) {
      const double eta_z =
          MeasureObject(testing::TruncatedBoxSurface(rng, extents, t), up).confidence[2];
      EXPECT_LT(eta_z, previous) << t;
      previous = eta_z;
    }
  }
}

TEST(Confidence, TiltedCylinderDecreases) {
  std::mt19937_64 rng(11);
  double previous = std::numeric_limits<double>::infinity();
  for (const double degrees : {0.0, 30.0, 45.0}) {
    const PointCloud cloud = testing::TiltedCylinder(rng, degrees * M_PI / 180);
    const double eta_z = MeasureObject(cloud, Eigen::Vector3d::UnitZ()).confidence[2];
    EXPECT_LT(eta_z, previous) << degrees;
    previous = eta_z;
  }
}

TEST(SelectReliable, ThresholdCases) {
  EXPECT_EQ(SelectReliable({0.912, 1.077, 0.926}, 0.7), (std::array<bool, 3>{true, true, true}));
  EXPECT_EQ(SelectReliable({0.593, 1.045, 0.291}, 0.7), (std::array<bool, 3>{false, true, false}));
  EXPECT_EQ(SelectReliable({0.1, 0.1, 0.1}, 0.7), (std::array<bool, 3>{false, false, false}));
  EXPECT_EQ(SelectReliable({0.7, 0.69, 2.0}, 0.7), (std::array<bool, 3>{true, false, true}));
}

TEST(SelectReliable, ThresholdRange) {
  EXPECT_THROW(SelectReliable({1, 1, 1}, 0), Error);
  EXPECT_THROW(SelectReliable({1, 1, 1}, 2.5), Error);
  EXPECT_NO_THROW(SelectReliable({1, 1, 1}, 2));
}

}  // namespace
}  // namespace objscale
