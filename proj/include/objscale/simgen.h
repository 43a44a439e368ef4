#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "objscale/geometry.h"
#include "objscale/metric_tree.h"
#include "objscale/scale.h"
#include "objscale/types.h"

namespace objscale {

// Synthetic object. The local frame has x along length, y along width, z up
// with the base centered at the origin. Yaw about z and base_mm place it in
// the simulator's ground frame (z up), in millimeters.
struct SimObject {
  CategoryPath category;
  ShapeKind shape = ShapeKind::kBox;
  Eigen::Vector3d true_dims_mm = Eigen::Vector3d::Zero();  // (w, l, h)
  Eigen::Vector3d base_mm = Eigen::Vector3d::Zero();
  double yaw = 0;
  // Box axis that was truncated (0 length, 1 width, 2 height), or -1.
  int truncated_axis = -1;
  // Scene coordinates (reconstruction units) with outward surface normals.
  PointCloud points;
  std::vector<Eigen::Vector3d> normals;

  Eigen::Vector3d TrueExtents() const {  // (length, width, height)
    return {true_dims_mm(1), true_dims_mm(0), true_dims_mm(2)};
  }
};

struct SimScene {
  double true_scale = 1;  // mm per reconstruction unit
  std::vector<SimObject> objects;
  std::vector<CameraPose> trajectory;
  // Rotation from the ground frame into scene coordinates.
  Eigen::Matrix3d world_rotation = Eigen::Matrix3d::Identity();
  uint64_t seed = 0;

  Eigen::Vector3d TrueUp() const { return world_rotation.col(2); }
  Eigen::Vector3d ToScene(const Eigen::Vector3d& ground_mm) const {
    return world_rotation * ground_mm / true_scale;
  }
};

struct SceneOptions {
  int n_objects = 5;
  double true_scale = 100;
  // Fraction of one axis extent removed, with a sparse fall-off band of
  // 0.5 * truncation before the cut.
  std::optional<double> truncation;
  // Axis to truncate; random when unset.
  std::optional<Dim> truncation_dim;
  uint64_t seed = 0;
  size_t points_per_object = 5000;
  // Place sizes at the prior mode reached from a weight-drawn component mean
  // instead of sampling the prior.
  bool dims_at_modes = false;
  int num_frames = 24;
  bool random_world_rotation = true;
  int max_placement_retries = 2000;
};

// Categories are drawn uniformly with replacement from the usable leaves.
SimScene GenerateScene(const CategoryNode& repo, const SceneOptions& options);

// Local mode of the mixture reached by fixed-point iteration from `start`.
SizeVector MixtureMode(const Gmm& gmm, const SizeVector& start);

// Shape sampling in the local object frame, uniform over surface area
// (closed surfaces) or over the solid volume.
struct SampledSurface {
  PointCloud points;
  std::vector<Eigen::Vector3d> normals;
};
SampledSurface SampleBoxSurface(const Eigen::Vector3d& extents, size_t n, std::mt19937_64& rng);
SampledSurface SampleCylinderSurface(double diameter, double height, size_t n,
                                     std::mt19937_64& rng);
PointCloud SampleCylinderVolume(double diameter, double height, size_t n, std::mt19937_64& rng);

// Truncation of a local-frame sample along box axis `axis` (0 length,
// 1 width, 2 height): keep probability is 1 below the band, falls
// quadratically to 0 at the cut and is 0 beyond it.
double TruncationKeepProbability(double normalized_coordinate, double truncation);

struct RenderOptions {
  // Fraction of visible points reconstructed in each frame.
  double keep_fraction = 0.5;
  // Instances with fewer labeled points are not reported.
  size_t min_instance_points = 10;
  uint64_t seed = 0;
};

// Per-frame labeled clouds: visible points (ray-cast against the analytic
// shapes), instance masks from the pixels hit by one object only, labels by
// mask projection.
std::vector<FrameObservation> RenderFrames(const SimScene& scene, const RenderOptions& options);

// Dimension estimates of every simulated object, using the up vector
// estimated from the scene trajectory.
std::vector<ObjectDimensions> MeasureSimObjects(const SimScene& scene,
                                                double confidence_threshold);

struct TrialOptions {
  std::vector<int> n_list = {1, 2, 5, 10, 20, 50};
  std::vector<double> r_list = {0, 0.03, 0.06, 0.09, 0.12, 0.15};
  int trials = 500;
  uint64_t seed = 42;
  double confidence_threshold = kDefaultConfidenceThreshold;
  size_t points_per_object = 5000;
  bool dims_at_modes = true;
  // True scales are drawn log-uniformly from this range.
  double scale_min = 20;
  double scale_max = 2000;
  int threads = 1;
};

struct TrialSummary {
  double mean = 0;
  double median = 0;
  double stddev = 0;
};

struct TrialReport {
  int n = 0;
  double r = 0;
  int trials = 0;
  // Relative scale error per trial; NaN where no object survived selection.
  std::vector<double> rel_errors;
  int failures = 0;
  TrialSummary summary;
};

TrialSummary Summarize(const std::vector<double>& values);

// Monte Carlo over (N, R): measured dims are multiplied by independent
// factors uniform in [1 - R, 1 + R] before selection and optimization.
std::vector<TrialReport> RunTrials(const CategoryNode& repo, const TrialOptions& options);

struct AblationOptions {
  int trials = 200;
  double truncation = 0.4;
  int n_objects = 5;
  uint64_t seed = 42;
  double confidence_threshold = kDefaultConfidenceThreshold;
  size_t points_per_object = 5000;
  double scale_min = 20;
  double scale_max = 2000;
  int threads = 1;
};

struct AblationReport {
  // Relative errors per scene; NaN where the arm had no usable object.
  std::vector<double> err_full_bbox;
  std::vector<double> err_filtered;
  double mean_full_bbox = 0;
  double mean_filtered = 0;
  int failures_full_bbox = 0;
  int failures_filtered = 0;
};

// Truncated scenes estimated twice: with every raw box dimension in the
// category mask, and with confidence-filtered dimensions.
AblationReport RunAblation(const CategoryNode& repo, const AblationOptions& options);

// Deterministic per-trial seed.
uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0);

}  // namespace objscale
