#include "objscale/merging.h"

#include <algorithm>
#include <limits>
#include <map>

#include "objscale/error.h"

namespace objscale {

std::vector<ObjectCloud> MergeFrame(std::vector<ObjectCloud> objects,
                                    const FrameObservation& frame, double threshold) {
  OBJSCALE_CHECK(threshold >= 0, ErrorCode::kInvalidArgument,
                 "merge threshold must be non-negative");
  // Instances grouped by category, preserving instance order.
  std::map<CategoryPath, std::vector<size_t>> instances_by_category;
  for (size_t j = 0; j < frame.instances.size(); ++j) {
    if (frame.instances[j].points.empty()) continue;
    instances_by_category[frame.instances[j].category].push_back(j);
  }

  std::vector<bool> instance_used(frame.instances.size(), false);
  for (const auto& [category, instance_ids] : instances_by_category) {
    std::vector<size_t> object_ids;
    for (size_t i = 0; i < objects.size(); ++i) {
      if (objects[i].category == category) object_ids.push_back(i);
    }
    if (object_ids.empty()) continue;

    const size_t m = object_ids.size(), n = instance_ids.size();
    std::vector<double> distance(m * n);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = 0; b < n; ++b) {
        distance[a * n + b] = CloudDistance(objects[object_ids[a]].points,
                                            frame.instances[instance_ids[b]].points);
      }
    }
    std::vector<bool> object_open(m, true), instance_open(n, true);
    std::vector<std::pair<size_t, size_t>> matches;
    for (size_t round = 0; round < std::min(m, n); ++round) {
      double best = std::numeric_limits<double>::infinity();
      size_t best_a = m, best_b = n;
      for (size_t a = 0; a < m; ++a) {
        if (!object_open[a]) continue;
        for (size_t b = 0; b < n; ++b) {
          if (instance_open[b] && distance[a * n + b] < best) {
            best = distance[a * n + b];
            best_a = a;
            best_b = b;
          }
        }
      }
      // Stop at the first minimum that fails the threshold; remaining pairs
      // are not examined.
      if (best_a == m || !(best < threshold)) break;
      object_open[best_a] = false;
      instance_open[best_b] = false;
      matches.emplace_back(best_a, best_b);
    }
    for (const auto& [a, b] : matches) {
      ObjectCloud& object = objects[object_ids[a]];
      const Instance& inst = frame.instances[instance_ids[b]];
      object.points.insert(object.points.end(), inst.points.begin(), inst.points.end());
      object.source_frames.insert(frame.frame_id);
      instance_used[instance_ids[b]] = true;
    }
  }

  for (size_t j = 0; j < frame.instances.size(); ++j) {
    const Instance& inst = frame.instances[j];
    if (instance_used[j] || inst.points.empty()) continue;
    ObjectCloud object;
    object.category = inst.category;
    object.points = inst.points;
    object.source_frames.insert(frame.frame_id);
    objects.push_back(std::move(object));
  }
  return objects;
}

double SceneDiagonal(const std::vector<FrameObservation>& frames) {
  bool any = false;
  Eigen::Vector3d lo = Eigen::Vector3d::Zero(), hi = Eigen::Vector3d::Zero();
  for (const auto& frame : frames) {
    for (const auto& inst : frame.instances) {
      for (const auto& p : inst.points) {
        if (!any) {
          lo = hi = p;
          any = true;
        }
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
  }
  return (hi - lo).norm();
}

double ResolveMergeThreshold(const std::vector<FrameObservation>& frames,
                             const SceneMergeOptions& options) {
  if (options.threshold) return *options.threshold;
  OBJSCALE_CHECK(options.threshold_frac >= 0, ErrorCode::kInvalidArgument,
                 "threshold fraction must be non-negative");
  return options.threshold_frac * SceneDiagonal(frames);
}

std::vector<ObjectCloud> MergeFrames(const std::vector<FrameObservation>& frames,
                                     double threshold) {
  std::vector<const FrameObservation*> ordered;
  for (const auto& f : frames) ordered.push_back(&f);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->frame_id < b->frame_id; });
  std::vector<ObjectCloud> objects;
  for (const auto* frame : ordered) objects = MergeFrame(std::move(objects), *frame, threshold);
  return objects;
}

PointCloud RemoveOutliers(const PointCloud& cloud, const SceneMergeOptions& options) {
  switch (options.outlier_method) {
    case OutlierMethod::kNone:
      return cloud;
    case OutlierMethod::kKnn:
      if (cloud.size() <= static_cast<size_t>(options.knn.k)) return cloud;
      return RemoveOutliersKnn(cloud, options.knn);
    case OutlierMethod::kIsolationForest:
      if (cloud.size() < static_cast<size_t>(options.iforest.subsample)) return cloud;
      return RemoveOutliersIForest(cloud, options.iforest);
  }
  return cloud;
}

std::vector<ObjectCloud> MergeScene(const std::vector<FrameObservation>& frames,
                                    const SceneMergeOptions& options) {
  const double threshold = ResolveMergeThreshold(frames, options);
  std::vector<ObjectCloud> merged = MergeFrames(frames, threshold);
  std::vector<ObjectCloud> out;
  for (auto& object : merged) {
    object.points = RemoveOutliers(object.points, options);
    if (object.points.size() >= options.min_points) out.push_back(std::move(object));
  }
  return out;
}

}  // namespace objscale
