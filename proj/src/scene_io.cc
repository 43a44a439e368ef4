#include "objscale/scene_io.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "objscale/error.h"
#include "objscale/json_writer.h"

namespace objscale {
namespace {

namespace fs = std::filesystem;

double ParseDouble(std::string_view text, const std::string& where) {
  double value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  OBJSCALE_CHECK(result.ec == std::errc() && result.ptr == text.data() + text.size(),
                 ErrorCode::kParse, where + ": invalid number '" + std::string(text) + "'");
  return value;
}

int ParseInt(std::string_view text, const std::string& where) {
  int value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  OBJSCALE_CHECK(result.ec == std::errc() && result.ptr == text.data() + text.size(),
                 ErrorCode::kParse, where + ": invalid integer '" + std::string(text) + "'");
  return value;
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view TrimLine(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  return line;
}

std::vector<Instance> ReadFrameCsv(const fs::path& path) {
  std::ifstream file(path);
  OBJSCALE_CHECK(file.good(), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::string line;
  OBJSCALE_CHECK(static_cast<bool>(std::getline(file, line)), ErrorCode::kParse,
                 "'" + path.string() + "' is empty");
  OBJSCALE_CHECK(TrimLine(line) == "instance,category,x,y,z", ErrorCode::kParse,
                 "'" + path.string() + "' must start with header instance,category,x,y,z");
  std::map<int, Instance> instances;
  int line_number = 1;
  while (std::getline(file, line)) {
    ++line_number;
    const std::string_view trimmed = TrimLine(line);
    if (trimmed.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_number);
    const auto fields = SplitFields(trimmed);
    OBJSCALE_CHECK(fields.size() == 5, ErrorCode::kParse, where + ": expected 5 fields");
    const int id = ParseInt(fields[0], where);
    const CategoryPath category = SplitCategory(std::string(fields[1]));
    OBJSCALE_CHECK(!category.empty(), ErrorCode::kParse, where + ": empty category");
    auto [it, inserted] = instances.try_emplace(id);
    if (inserted) {
      it->second.instance_id = id;
      it->second.category = category;
    } else {
      OBJSCALE_CHECK(it->second.category == category, ErrorCode::kParse,
                     where + ": instance " + std::to_string(id) + " changes category");
    }
    it->second.points.emplace_back(ParseDouble(fields[2], where), ParseDouble(fields[3], where),
                                   ParseDouble(fields[4], where));
  }
  std::vector<Instance> out;
  for (auto& [id, inst] : instances) out.push_back(std::move(inst));
  return out;
}

template <typename T>
T Field(const nlohmann::json& value, const char* key, const std::string& where) {
  OBJSCALE_CHECK(value.is_object() && value.contains(key), ErrorCode::kParse,
                 where + ": missing '" + key + "'");
  try {
    return value.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    Throw(ErrorCode::kParse, where + ": bad '" + key + "': " + e.what());
  }
}

nlohmann::ordered_json Vec3ToJson(const Eigen::Vector3d& v) {
  return nlohmann::ordered_json::array({v.x(), v.y(), v.z()});
}

nlohmann::ordered_json DimEntry(double value, double confidence, bool reliable) {
  nlohmann::ordered_json entry;
  entry["value"] = value;
  entry["confidence"] = confidence;
  entry["reliable"] = reliable;
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.4g(%.2f)", value, confidence);
  entry["annotation"] = buffer;
  return entry;
}

}  // namespace

nlohmann::ordered_json PoseToJson(const CameraPose& pose) {
  nlohmann::ordered_json out;
  nlohmann::ordered_json r = nlohmann::ordered_json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(pose.rotation(i, j));
  }
  out["R"] = r;
  out["t"] = Vec3ToJson(pose.translation);
  out["fx"] = pose.fx;
  out["fy"] = pose.fy;
  out["cx"] = pose.cx;
  out["cy"] = pose.cy;
  out["width"] = pose.width;
  out["height"] = pose.height;
  return out;
}

CameraPose PoseFromJson(const nlohmann::json& value) {
  const std::string where = "pose";
  const auto r = Field<std::vector<double>>(value, "R", where);
  const auto t = Field<std::vector<double>>(value, "t", where);
  OBJSCALE_CHECK(r.size() == 9 && t.size() == 3, ErrorCode::kParse,
                 "pose needs 9 rotation and 3 translation entries");
  CameraPose pose;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) pose.rotation(i, j) = r[3 * i + j];
    pose.translation(i) = t[i];
  }
  pose.fx = Field<double>(value, "fx", where);
  pose.fy = Field<double>(value, "fy", where);
  pose.cx = Field<double>(value, "cx", where);
  pose.cy = Field<double>(value, "cy", where);
  pose.width = Field<int>(value, "width", where);
  pose.height = Field<int>(value, "height", where);
  try {
    pose.Validate();
  } catch (const Error& e) {
    Throw(ErrorCode::kParse, std::string("invalid pose: ") + e.what());
  }
  return pose;
}

std::vector<FrameObservation> LoadSceneBundle(const fs::path& dir) {
  OBJSCALE_CHECK(fs::is_directory(dir), ErrorCode::kIo,
                 "scene bundle '" + dir.string() + "' is not a directory");
  const nlohmann::ordered_json manifest = ReadJsonFile(dir / "manifest.json");
  OBJSCALE_CHECK(manifest.is_object() && manifest.value("version", 0) == 1, ErrorCode::kParse,
                 "manifest.json must have version 1");
  OBJSCALE_CHECK(manifest.contains("frames") && manifest["frames"].is_array(),
                 ErrorCode::kParse, "manifest.json needs a frames array");
  std::vector<FrameObservation> frames;
  for (const auto& entry : manifest["frames"]) {
    FrameObservation frame;
    frame.frame_id = Field<int>(entry, "id", "manifest frame");
    OBJSCALE_CHECK(entry.contains("pose"), ErrorCode::kParse, "manifest frame without pose");
    frame.pose = PoseFromJson(entry["pose"]);
    const auto cloud = Field<std::string>(entry, "cloud", "manifest frame");
    frame.instances = ReadFrameCsv(dir / cloud);
    frames.push_back(std::move(frame));
  }
  std::stable_sort(frames.begin(), frames.end(),
                   [](const auto& a, const auto& b) { return a.frame_id < b.frame_id; });
  for (size_t i = 1; i < frames.size(); ++i) {
    OBJSCALE_CHECK(frames[i].frame_id != frames[i - 1].frame_id, ErrorCode::kParse,
                   "duplicate frame id " + std::to_string(frames[i].frame_id));
  }
  return frames;
}

void WriteSceneBundle(const fs::path& dir, const std::vector<FrameObservation>& frames) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  OBJSCALE_CHECK(!ec, ErrorCode::kIo, "cannot create '" + dir.string() + "': " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["version"] = 1;
  manifest["frames"] = nlohmann::ordered_json::array();
  for (const auto& frame : frames) {
    const std::string cloud = "frame_" + std::to_string(frame.frame_id) + ".csv";
    nlohmann::ordered_json entry;
    entry["id"] = frame.frame_id;
    entry["pose"] = PoseToJson(frame.pose);
    entry["cloud"] = cloud;
    manifest["frames"].push_back(entry);

    std::ofstream file(dir / cloud, std::ios::binary);
    OBJSCALE_CHECK(file.good(), ErrorCode::kIo, "cannot write '" + (dir / cloud).string() + "'");
    file << "instance,category,x,y,z\n";
    for (const auto& inst : frame.instances) {
      const std::string category = JoinCategory(inst.category);
      for (const auto& p : inst.points) {
        file << inst.instance_id << ',' << category << ',' << FormatDouble(p.x()) << ','
             << FormatDouble(p.y()) << ',' << FormatDouble(p.z()) << '\n';
      }
    }
    OBJSCALE_CHECK(file.good(), ErrorCode::kIo, "failed writing '" + (dir / cloud).string() + "'");
  }
  WriteJsonFile(dir / "manifest.json", manifest);
}

nlohmann::ordered_json ObjectsToJson(const std::vector<ObjectCloud>& objects, double threshold,
                                     bool include_points) {
  nlohmann::ordered_json out;
  out["version"] = 1;
  out["threshold"] = threshold;
  out["objects"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < objects.size(); ++i) {
    nlohmann::ordered_json o;
    o["id"] = i;
    o["category"] = JoinCategory(objects[i].category);
    o["point_count"] = objects[i].points.size();
    o["source_frames"] = objects[i].source_frames;
    if (include_points) {
      nlohmann::ordered_json pts = nlohmann::ordered_json::array();
      for (const auto& p : objects[i].points) pts.push_back(Vec3ToJson(p));
      o["points"] = std::move(pts);
    }
    out["objects"].push_back(std::move(o));
  }
  return out;
}

ObjectsFile ObjectsFromJson(const nlohmann::json& value) {
  OBJSCALE_CHECK(value.is_object() && value.value("version", 0) == 1, ErrorCode::kParse,
                 "objects file must have version 1");
  ObjectsFile file;
  file.threshold = Field<double>(value, "threshold", "objects file");
  OBJSCALE_CHECK(value.contains("objects") && value["objects"].is_array(), ErrorCode::kParse,
                 "objects file needs an objects array");
  bool any_without = false;
  for (const auto& o : value["objects"]) {
    ObjectCloud cloud;
    cloud.category = SplitCategory(Field<std::string>(o, "category", "object"));
    const auto frames = o.value("source_frames", std::vector<int>{});
    cloud.source_frames.insert(frames.begin(), frames.end());
    file.point_counts.push_back(Field<size_t>(o, "point_count", "object"));
    if (o.contains("points")) {
      for (const auto& p : o["points"]) {
        OBJSCALE_CHECK(p.is_array() && p.size() == 3, ErrorCode::kParse,
                       "object points must be [x, y, z]");
        cloud.points.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      }
      OBJSCALE_CHECK(cloud.points.size() == file.point_counts.back(), ErrorCode::kParse,
                     "object point_count does not match its points");
    } else {
      any_without = true;
    }
    file.objects.push_back(std::move(cloud));
  }
  file.has_points = !any_without;
  return file;
}

nlohmann::ordered_json DimsToJson(const std::vector<ObjectDimensions>& dims,
                                  const Eigen::Vector3d& up, double confidence_threshold) {
  nlohmann::ordered_json out;
  out["version"] = 1;
  out["up"] = Vec3ToJson(up);
  out["confidence_threshold"] = confidence_threshold;
  out["objects"] = nlohmann::ordered_json::array();
  for (const auto& d : dims) {
    const DimensionEstimate& e = d.estimate;
    nlohmann::ordered_json o;
    o["id"] = d.id;
    o["category"] = JoinCategory(d.category);
    o["width"] = DimEntry(e.width, e.Confidence(Dim::kWidth), e.Reliable(Dim::kWidth));
    o["length"] = DimEntry(e.length, e.Confidence(Dim::kLength), e.Reliable(Dim::kLength));
    o["height"] = DimEntry(e.height, e.Confidence(Dim::kHeight), e.Reliable(Dim::kHeight));
    o["axes"] = {{"length", Vec3ToJson(e.axes.col(0))},
                 {"width", Vec3ToJson(e.axes.col(1))},
                 {"height", Vec3ToJson(e.axes.col(2))}};
    o["center"] = Vec3ToJson(e.center);
    out["objects"].push_back(std::move(o));
  }
  return out;
}

nlohmann::ordered_json SceneTruthToJson(const SimScene& scene) {
  nlohmann::ordered_json out;
  out["version"] = 1;
  out["true_scale"] = scene.true_scale;
  out["seed"] = scene.seed;
  out["up"] = Vec3ToJson(scene.TrueUp());
  out["objects"] = nlohmann::ordered_json::array();
  for (const auto& o : scene.objects) {
    nlohmann::ordered_json j;
    j["category"] = JoinCategory(o.category);
    j["shape"] = o.shape == ShapeKind::kCylinder ? "cylinder" : "box";
    j["dims_mm"] = {{"w", o.true_dims_mm(0)}, {"l", o.true_dims_mm(1)}, {"h", o.true_dims_mm(2)}};
    j["truncated_axis"] = o.truncated_axis;
    out["objects"].push_back(std::move(j));
  }
  return out;
}

}  // namespace objscale
