#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "objscale/dimensions.h"
#include "objscale/merging.h"
#include "objscale/metric_tree.h"
#include "objscale/scale.h"

namespace objscale {

struct PipelineOptions {
  SceneMergeOptions merge;
  double confidence_threshold = kDefaultConfidenceThreshold;
  double eigen_gap = kDefaultEigenGap;
  // Explicit scale window; the automatic window is used when unset.
  std::optional<ScaleWindow> window;
  int threads = 1;
  bool record_timings = false;
};

struct PipelineResult {
  double merge_threshold = 0;
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  std::vector<ObjectCloud> objects;
  std::vector<ObjectDimensions> dims;
  MeasuredObjectSet measured;
  ScaleEstimate estimate;
  // Wall-clock milliseconds per stage, in stage order.
  std::vector<std::pair<std::string, double>> timings;
};

// Merge, de-outlier, up vector, dimensions, selection and optimization.
// Errors are rethrown with the failing stage prefixed to the message.
PipelineResult RunPipeline(const std::vector<FrameObservation>& frames, const CategoryNode& repo,
                           const PipelineOptions& options);

// Merged, de-outliered objects and their dimensions, as used by RunPipeline.
std::vector<ObjectCloud> MergeStage(const std::vector<FrameObservation>& frames,
                                    const SceneMergeOptions& options, double* threshold);
std::vector<ObjectDimensions> DimensionStage(const std::vector<ObjectCloud>& objects,
                                             const Eigen::Vector3d& up,
                                             double confidence_threshold, size_t min_points,
                                             std::vector<DroppedObject>* dropped);

constexpr size_t kMaxCurvePoints = 1000;

// Indices of at most `max_points` grid points spread evenly over the grid,
// always including the first, last and argmax index.
std::vector<size_t> CurveIndices(size_t grid_size, size_t argmax, size_t max_points);

nlohmann::ordered_json ReportToJson(const PipelineResult& result, const PipelineOptions& options);

}  // namespace objscale
