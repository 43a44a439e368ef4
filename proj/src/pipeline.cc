#include "objscale/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "objscale/error.h"

namespace objscale {
namespace {

class StageTimer {
 public:
  StageTimer(const char* name, PipelineResult* result, bool record)
      : name_(name), result_(result), record_(record), start_(std::chrono::steady_clock::now()) {}

  void Stop() {
    if (!record_) return;
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    result_->timings.emplace_back(
        name_, std::chrono::duration<double, std::milli>(elapsed).count());
  }

 private:
  const char* name_;
  PipelineResult* result_;
  bool record_;
  std::chrono::steady_clock::time_point start_;
};

template <typename Fn>
auto RunStage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    Throw(e.code(), std::string(name) + ": " + e.what());
  }
}

nlohmann::ordered_json Vec3ToJson(const Eigen::Vector3d& v) {
  return nlohmann::ordered_json::array({v.x(), v.y(), v.z()});
}

}  // namespace

std::vector<ObjectCloud> MergeStage(const std::vector<FrameObservation>& frames,
                                    const SceneMergeOptions& options, double* threshold) {
  *threshold = ResolveMergeThreshold(frames, options);
  SceneMergeOptions resolved = options;
  resolved.threshold = *threshold;
  return MergeScene(frames, resolved);
}

std::vector<ObjectDimensions> DimensionStage(const std::vector<ObjectCloud>& objects,
                                             const Eigen::Vector3d& up,
                                             double confidence_threshold, size_t min_points,
                                             std::vector<DroppedObject>* dropped) {
  std::vector<ObjectDimensions> out;
  for (size_t i = 0; i < objects.size(); ++i) {
    try {
      ObjectDimensions d;
      d.id = static_cast<int>(i);
      d.category = objects[i].category;
      d.estimate = MeasureObject(objects[i].points, up, confidence_threshold, min_points);
      out.push_back(std::move(d));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate || dropped == nullptr) throw;
      dropped->push_back({static_cast<int>(i), objects[i].category,
                          std::string("dimension extraction failed: ") + e.what()});
    }
  }
  return out;
}

PipelineResult RunPipeline(const std::vector<FrameObservation>& frames, const CategoryNode& repo,
                           const PipelineOptions& options) {
  PipelineResult result;
  OBJSCALE_CHECK(options.confidence_threshold > 0 && options.confidence_threshold <= 2,
                 ErrorCode::kInvalidArgument, "confidence threshold must lie in (0, 2]");

  StageTimer merge_timer("merge", &result, options.record_timings);
  result.objects = RunStage("merge", [&] {
    return MergeStage(frames, options.merge, &result.merge_threshold);
  });
  merge_timer.Stop();
  OBJSCALE_CHECK(!result.objects.empty(), ErrorCode::kNoObjects,
                 "merge: no objects detected in the scene");

  StageTimer up_timer("up_vector", &result, options.record_timings);
  result.up = RunStage("up_vector", [&] {
    std::vector<CameraPose> poses;
    for (const auto& f : frames) poses.push_back(f.pose);
    return EstimateUpVector(poses, options.eigen_gap);
  });
  up_timer.Stop();

  StageTimer dims_timer("dimensions", &result, options.record_timings);
  std::vector<DroppedObject> dims_dropped;
  result.dims = RunStage("dimensions", [&] {
    return DimensionStage(result.objects, result.up, options.confidence_threshold,
                          options.merge.min_points, &dims_dropped);
  });
  dims_timer.Stop();

  StageTimer select_timer("selection", &result, options.record_timings);
  result.measured = RunStage("selection", [&] {
    SelectionOptions selection;
    selection.confidence_threshold = options.confidence_threshold;
    return BuildMeasuredObjects(result.dims, repo, selection);
  });
  result.measured.dropped.insert(result.measured.dropped.end(), dims_dropped.begin(),
                                 dims_dropped.end());
  std::sort(result.measured.dropped.begin(), result.measured.dropped.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  select_timer.Stop();
  OBJSCALE_CHECK(!result.measured.objects.empty(), ErrorCode::kNoObjects,
                 "selection: no object has a usable dimension");

  StageTimer opt_timer("optimization", &result, options.record_timings);
  result.estimate = RunStage("optimization", [&] {
    const ScaleWindow window =
        options.window ? *options.window : AutoWindow(result.measured.objects);
    return OptimizeScale(result.measured.objects, window, options.threads);
  });
  opt_timer.Stop();
  return result;
}

std::vector<size_t> CurveIndices(size_t grid_size, size_t argmax, size_t max_points) {
  std::vector<size_t> out;
  if (grid_size == 0) return out;
  if (grid_size <= max_points) {
    for (size_t i = 0; i < grid_size; ++i) out.push_back(i);
    return out;
  }
  for (size_t i = 0; i < max_points; ++i) {
    // Exact integer rounding of i * (grid_size - 1) / (max_points - 1).
    const size_t num = i * (grid_size - 1);
    const size_t den = max_points - 1;
    out.push_back((2 * num + den) / (2 * den));
  }
  // Swap the nearest sample for the argmax so the peak is always present.
  auto it = std::lower_bound(out.begin(), out.end(), argmax);
  if (it != out.end() && *it == argmax) return out;
  size_t replace = it == out.end() ? out.size() - 1 : static_cast<size_t>(it - out.begin());
  if (it != out.begin() && it != out.end() && argmax - *(it - 1) < *it - argmax) --replace;
  if (replace == 0) replace = 1;
  if (replace == out.size() - 1) replace = out.size() - 2;
  out[replace] = argmax;
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::ordered_json ReportToJson(const PipelineResult& result, const PipelineOptions& options) {
  const ScaleEstimate& est = result.estimate;
  nlohmann::ordered_json out;
  out["version"] = 1;
  out["s_hat"] = est.s_hat;
  out["s_refined"] = est.s_refined ? nlohmann::ordered_json(*est.s_refined) : nullptr;
  out["argmax_index"] = est.argmax_index;
  out["window"] = {{"s_min", est.window.s_min},
                   {"s_max", est.window.s_max},
                   {"step", est.window.step},
                   {"points", est.window.NumPoints()},
                   {"auto", !options.window.has_value()}};
  out["confidence_threshold"] = options.confidence_threshold;
  out["merge_threshold"] = result.merge_threshold;
  out["up"] = Vec3ToJson(result.up);

  nlohmann::ordered_json objects = nlohmann::ordered_json::array();
  for (const auto& m : result.measured.objects) {
    nlohmann::ordered_json o;
    o["id"] = m.id;
    o["category"] = JoinCategory(m.category);
    o["point_count"] = result.objects[static_cast<size_t>(m.id)].points.size();
    std::string used;
    nlohmann::ordered_json values = nlohmann::ordered_json::object();
    for (size_t k = 0; k < m.dims.size(); ++k) {
      const std::string letter(1, DimLetter(m.dims[k]));
      used += letter;
      values[letter] = m.values(static_cast<int>(k));
    }
    o["used_dims"] = used;
    o["values"] = values;
    for (const auto& d : result.dims) {
      if (d.id != m.id) continue;
      o["confidence"] = {{"w", d.estimate.Confidence(Dim::kWidth)},
                         {"l", d.estimate.Confidence(Dim::kLength)},
                         {"h", d.estimate.Confidence(Dim::kHeight)}};
    }
    for (const auto& c : est.per_object) {
      if (c.id == m.id) o["log_likelihood"] = c.log_likelihood;
    }
    objects.push_back(std::move(o));
  }
  out["objects"] = std::move(objects);

  nlohmann::ordered_json dropped = nlohmann::ordered_json::array();
  for (const auto& d : result.measured.dropped) {
    dropped.push_back({{"id", d.id}, {"category", JoinCategory(d.category)}, {"reason", d.reason}});
  }
  out["dropped"] = std::move(dropped);

  const std::vector<size_t> indices =
      CurveIndices(est.grid_s.size(), est.argmax_index, kMaxCurvePoints);
  nlohmann::ordered_json s = nlohmann::ordered_json::array();
  nlohmann::ordered_json ll = nlohmann::ordered_json::array();
  for (const size_t i : indices) {
    s.push_back(est.grid_s[i]);
    ll.push_back(est.grid_log_likelihood[i]);
  }
  out["curve"] = {{"s", std::move(s)}, {"log_likelihood", std::move(ll)}};

  if (options.record_timings) {
    nlohmann::ordered_json timings = nlohmann::ordered_json::object();
    for (const auto& [name, ms] : result.timings) timings[name] = ms;
    out["timings_ms"] = std::move(timings);
  }
  return out;
}

}  // namespace objscale
