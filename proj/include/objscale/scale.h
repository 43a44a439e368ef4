#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "objscale/dimensions.h"
#include "objscale/gmm.h"
#include "objscale/metric_tree.h"
#include "objscale/types.h"

namespace objscale {

// Per-object log term floor, keeping the grid totally ordered when a density
// underflows.
constexpr double kLogTermFloor = -1e12;

struct ObjectDimensions {
  int id = 0;
  CategoryPath category;
  DimensionEstimate estimate;
};

// Object admitted to the optimization: the dimensions it contributes (in
// reconstruction units) and its prior marginalized to exactly those.
struct MeasuredObject {
  int id = 0;
  CategoryPath category;
  std::vector<Dim> dims;
  SizeVector values;
  Gmm prior;
};

struct DroppedObject {
  int id = 0;
  CategoryPath category;
  std::string reason;
};

struct MeasuredObjectSet {
  std::vector<MeasuredObject> objects;
  std::vector<DroppedObject> dropped;
};

struct SelectionOptions {
  // When false every dimension in the category's dim_mask is used regardless
  // of confidence.
  bool use_confidence = true;
  double confidence_threshold = kDefaultConfidenceThreshold;
};

// Used dims are the reliable dims intersected with the category dim_mask.
// Objects with no usable dims or no prior are dropped with a reason; unknown
// category paths throw.
MeasuredObjectSet BuildMeasuredObjects(std::span<const ObjectDimensions> dims,
                                       const CategoryNode& root,
                                       const SelectionOptions& options = {});

// Sum over objects of log phi_i(s * L_i), terms added in object-id order.
double LogPosterior(std::span<const MeasuredObject> objects, double s);

struct ScaleWindow {
  double s_min = 0;
  double s_max = 0;
  double step = 0;

  size_t NumPoints() const;
  double At(size_t i) const { return std::min(s_max, s_min + static_cast<double>(i) * step); }
  void Validate() const;
};

struct ObjectContribution {
  int id = 0;
  double log_likelihood = 0;
};

struct ScaleEstimate {
  double s_hat = 0;
  size_t argmax_index = 0;
  // Vertex of the parabola through the argmax and its grid neighbours.
  std::optional<double> s_refined;
  std::vector<double> grid_s;
  std::vector<double> grid_log_likelihood;
  std::vector<ObjectContribution> per_object;
  ScaleWindow window;
};

// Exhaustive grid evaluation; ties resolve to the smallest s.
ScaleEstimate OptimizeScale(std::span<const MeasuredObject> objects, const ScaleWindow& window,
                            int threads = 1);

// Candidate scales are component mean / measured value (median over used
// dims) for every prior component of every object; the window spans
// [0.2 * min, 5 * max] with 10000 steps.
ScaleWindow AutoWindow(std::span<const MeasuredObject> objects);

std::vector<double> CandidateScales(std::span<const MeasuredObject> objects);

}  // namespace objscale
