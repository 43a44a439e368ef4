#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "objscale/geometry.h"
#include "objscale/outliers.h"
#include "objscale/types.h"

namespace objscale {

// Cloud of one real object accumulated over frames.
struct ObjectCloud {
  CategoryPath category;
  PointCloud points;
  std::set<int> source_frames;
};

// Greedy association of one frame's instances with the current objects.
// Within each category the globally closest (object, instance) pair is merged
// while its distance stays below `threshold`; the first pair at or above it
// ends the search for that category, even if other pairs remain. Ties pick
// the lowest (object index, instance index). Unmatched instances become new
// objects appended in instance order; unmatched objects are kept.
std::vector<ObjectCloud> MergeFrame(std::vector<ObjectCloud> objects,
                                    const FrameObservation& frame, double threshold);

enum class OutlierMethod { kNone, kKnn, kIsolationForest };

struct SceneMergeOptions {
  // Merge threshold as a fraction of the scene bounding-box diagonal.
  double threshold_frac = 0.02;
  // Absolute threshold in reconstruction units; overrides threshold_frac.
  std::optional<double> threshold;
  OutlierMethod outlier_method = OutlierMethod::kKnn;
  KnnOutlierOptions knn;
  IsolationForestOptions iforest;
  size_t min_points = 50;
};

// Diagonal of the bounding box over all instance points of all frames.
double SceneDiagonal(const std::vector<FrameObservation>& frames);

double ResolveMergeThreshold(const std::vector<FrameObservation>& frames,
                             const SceneMergeOptions& options);

// Merged objects before outlier removal and size filtering.
std::vector<ObjectCloud> MergeFrames(const std::vector<FrameObservation>& frames,
                                     double threshold);

// Folds MergeFrame over frames (sorted by frame id), then removes outliers per
// object and drops objects with fewer than min_points points.
std::vector<ObjectCloud> MergeScene(const std::vector<FrameObservation>& frames,
                                    const SceneMergeOptions& options = {});

PointCloud RemoveOutliers(const PointCloud& cloud, const SceneMergeOptions& options);

}  // namespace objscale
