#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "objscale/geometry.h"
#include "objscale/merging.h"
#include "objscale/scale.h"
#include "objscale/simgen.h"

namespace objscale {

// Scene bundle: manifest.json with poses plus one labeled CSV per frame
// (header `instance,category,x,y,z`). Frames come back sorted by id and
// instances by instance id.
std::vector<FrameObservation> LoadSceneBundle(const std::filesystem::path& dir);
void WriteSceneBundle(const std::filesystem::path& dir,
                      const std::vector<FrameObservation>& frames);

nlohmann::ordered_json PoseToJson(const CameraPose& pose);
CameraPose PoseFromJson(const nlohmann::json& value);

// Merged objects as written by the `merge` command.
struct ObjectsFile {
  double threshold = 0;
  std::vector<ObjectCloud> objects;
  std::vector<size_t> point_counts;
  bool has_points = false;
};

nlohmann::ordered_json ObjectsToJson(const std::vector<ObjectCloud>& objects, double threshold,
                                     bool include_points);
ObjectsFile ObjectsFromJson(const nlohmann::json& value);

// Per-object dims with "value(confidence)" annotations.
nlohmann::ordered_json DimsToJson(const std::vector<ObjectDimensions>& dims,
                                  const Eigen::Vector3d& up, double confidence_threshold);

// Ground truth of a simulated scene.
nlohmann::ordered_json SceneTruthToJson(const SimScene& scene);

}  // namespace objscale
