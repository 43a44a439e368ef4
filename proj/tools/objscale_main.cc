#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "objscale/error.h"
#include "objscale/json_writer.h"
#include "objscale/merging.h"
#include "objscale/metric_tree.h"
#include "objscale/pipeline.h"
#include "objscale/scene_io.h"
#include "objscale/simgen.h"

namespace {

using namespace objscale;

enum ExitCode {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIoError = 2,
  kExitNoObjects = 3,
  kExitDegenerate = 4,
  kExitOther = 5,
};

struct GlobalFlags {
  uint64_t seed = 0;
  int threads = 1;
  bool quiet = false;
  std::string config;
};

struct MergeFlags {
  double threshold_frac = 0.02;
  std::optional<double> threshold;
  std::string outlier = "knn";
  int knn_k = 10;
  double knn_std = 2.0;
  int iforest_trees = 100;
  int iforest_subsample = 256;
  double iforest_contamination = 0.02;
  size_t min_points = 50;

  void Register(CLI::App* cmd) {
    cmd->add_option("--threshold-frac", threshold_frac,
                    "Merge threshold as a fraction of the scene diagonal")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threshold", threshold, "Absolute merge threshold (scene units)");
    cmd->add_option("--outlier", outlier, "Outlier removal: knn, iforest or none")
        ->check(CLI::IsMember({"knn", "iforest", "none"}));
    cmd->add_option("--knn-k", knn_k, "Neighbours for KNN outlier removal")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--knn-std", knn_std, "Std-dev multiplier for KNN outlier removal")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--iforest-trees", iforest_trees)->check(CLI::PositiveNumber);
    cmd->add_option("--iforest-subsample", iforest_subsample)->check(CLI::PositiveNumber);
    cmd->add_option("--iforest-contamination", iforest_contamination)
        ->check(CLI::Range(0.0, 0.4999));
    cmd->add_option("--min-points", min_points, "Minimum points per merged object");
  }

  SceneMergeOptions Options(uint64_t seed) const {
    SceneMergeOptions o;
    o.threshold_frac = threshold_frac;
    o.threshold = threshold;
    o.outlier_method = outlier == "knn"       ? OutlierMethod::kKnn
                       : outlier == "iforest" ? OutlierMethod::kIsolationForest
                                              : OutlierMethod::kNone;
    o.knn.k = knn_k;
    o.knn.stddev_mult = knn_std;
    o.iforest.n_trees = iforest_trees;
    o.iforest.subsample = iforest_subsample;
    o.iforest.contamination = iforest_contamination;
    o.iforest.seed = seed;
    o.min_points = min_points;
    return o;
  }
};

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (const char c : text) {
    if (c == ',') {
      out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

template <typename T>
std::vector<T> ParseList(const std::string& text, const char* flag) {
  std::vector<T> out;
  for (const auto& item : SplitList(text)) {
    try {
      size_t used = 0;
      if constexpr (std::is_integral_v<T>) {
        out.push_back(static_cast<T>(std::stoll(item, &used)));
      } else {
        out.push_back(static_cast<T>(std::stod(item, &used)));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      Throw(ErrorCode::kInvalidArgument, std::string(flag) + ": bad list entry '" + item + "'");
    }
  }
  OBJSCALE_CHECK(!out.empty(), ErrorCode::kInvalidArgument, std::string(flag) + " is empty");
  return out;
}

std::string ConfigValue(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_array()) {
    std::string out;
    for (size_t i = 0; i < value.size(); ++i) {
      if (i > 0) out += ",";
      out += ConfigValue(value[i]);
    }
    return out;
  }
  if (value.is_number_float()) return FormatDouble(value.get<double>());
  return value.dump();
}

// Appends `--key value` for every config entry whose flag is not already on
// the command line. Keys may sit at the top level or under the subcommand's
// name; booleans become bare flags when true.
std::vector<std::string> ApplyConfig(std::vector<std::string> args) {
  std::string config_path;
  std::string subcommand;
  for (size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    if (subcommand.empty() && !args[i].empty() && args[i][0] != '-' &&
        (i == 1 || args[i - 1].rfind("--", 0) != 0 || args[i - 1] == "--quiet")) {
      subcommand = args[i];
    }
  }
  if (config_path.empty()) return args;
  const nlohmann::ordered_json config = ReadJsonFile(config_path);
  OBJSCALE_CHECK(config.is_object(), ErrorCode::kParse, "config must be a JSON object");

  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  }
  auto add = [&](const std::string& key, const nlohmann::json& value) {
    if (given.count(key) || key == "config") return;
    given.insert(key);
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
      return;
    }
    args.push_back("--" + key);
    args.push_back(ConfigValue(value));
  };
  if (!subcommand.empty() && config.contains(subcommand) && config[subcommand].is_object()) {
    for (const auto& [key, value] : config[subcommand].items()) add(key, value);
  }
  for (const auto& [key, value] : config.items()) {
    if (value.is_object()) continue;
    add(key, value);
  }
  return args;
}

void Say(const GlobalFlags& g, const std::string& line) {
  if (!g.quiet) std::cout << line << "\n";
}

std::string Fmt(const char* format, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), format, v);
  return buffer;
}

std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  OBJSCALE_CHECK(out.good(), ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return out;
}

CategoryNode LoadPriors(const std::string& path, const GlobalFlags& g) {
  RepositoryOptions options;
  options.seed = g.seed;
  return LoadRepository(path, options);
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo:
    case ErrorCode::kParse:
      return kExitIoError;
    case ErrorCode::kNoObjects:
      return kExitNoObjects;
    case ErrorCode::kDegenerate:
      return kExitDegenerate;
    default:
      return kExitOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  GlobalFlags g;
  CLI::App app{"Metric scale recovery for monocular reconstructions from object size priors"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress the stdout summary");
  app.add_option("--config", g.config, "JSON file with flag values (command line wins)");

  // estimate
  MergeFlags est_merge;
  std::string est_scene, est_priors, est_out = "report.json";
  std::optional<double> est_smin, est_smax, est_ds;
  bool est_auto = false, est_timings = false;
  double est_conf = kDefaultConfidenceThreshold;
  auto* estimate = app.add_subcommand("estimate", "Estimate the scene scale (mm per unit)");
  estimate->add_option("--scene", est_scene, "Scene bundle directory")->required();
  estimate->add_option("--priors", est_priors, "Priors JSON")->required();
  estimate->add_option("--smin", est_smin, "Grid start")->check(CLI::PositiveNumber);
  estimate->add_option("--smax", est_smax, "Grid end")->check(CLI::PositiveNumber);
  estimate->add_option("--ds", est_ds, "Grid step")->check(CLI::PositiveNumber);
  auto* auto_window =
      estimate->add_flag("--auto-window", est_auto, "Window from the priors (default)");
  for (const char* name : {"--smin", "--smax", "--ds"}) {
    auto* opt = estimate->get_option(name);
    opt->excludes(auto_window);
    for (const char* other : {"--smin", "--smax", "--ds"}) {
      if (std::string(other) != name) opt->needs(estimate->get_option(other));
    }
  }
  estimate->add_option("--conf-threshold", est_conf, "Dimension confidence threshold")
      ->check(CLI::Range(1e-9, 2.0));
  estimate->add_option("--out", est_out, "Report path");
  estimate->add_flag("--record-timings", est_timings, "Write stage timings into the report");
  est_merge.Register(estimate);

  // merge
  MergeFlags merge_flags;
  std::string merge_scene, merge_out = "objects.json";
  bool merge_points = false;
  auto* merge = app.add_subcommand("merge", "Merge per-frame instances into objects");
  merge->add_option("--scene", merge_scene, "Scene bundle directory")->required();
  merge->add_option("--out", merge_out, "Objects JSON path");
  merge->add_flag("--points", merge_points, "Include raw point coordinates");
  merge_flags.Register(merge);

  // dims
  MergeFlags dims_merge;
  std::string dims_scene, dims_objects, dims_out = "dims.json";
  double dims_conf = kDefaultConfidenceThreshold;
  auto* dims = app.add_subcommand("dims", "Extract object dimensions and confidences");
  dims->add_option("--scene", dims_scene, "Scene bundle directory")->required();
  dims->add_option("--objects", dims_objects, "Objects JSON from `merge`")->required();
  dims->add_option("--conf-threshold", dims_conf)->check(CLI::Range(1e-9, 2.0));
  dims->add_option("--out", dims_out, "Dims JSON path");
  dims_merge.Register(dims);

  // fit-priors
  std::string fit_priors, fit_out = "priors_fitted.json";
  RepositoryOptions fit_options;
  auto* fit = app.add_subcommand("fit-priors", "Fit size mixtures and write them back");
  fit->add_option("--priors", fit_priors, "Priors JSON")->required();
  fit->add_option("--out", fit_out, "Output priors JSON");
  fit->add_option("--min-samples", fit_options.min_samples)->check(CLI::PositiveNumber);
  fit->add_option("--max-components", fit_options.max_components)->check(CLI::Range(1, 10));
  fit->add_option("--cov-floor", fit_options.cov_floor)->check(CLI::PositiveNumber);
  bool fit_refit = false;
  fit->add_flag("--refit", fit_refit, "Refit leaves that already carry a mixture");

  // simulate
  std::string sim_priors, sim_out = "trials.csv";
  std::string sim_n = "1,2,5,10,20,50", sim_r = "0,0.03,0.06,0.09,0.12,0.15";
  TrialOptions trial_options;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo error versus N and R");
  simulate->add_option("--priors", sim_priors, "Priors JSON")->required();
  simulate->add_option("--n-list", sim_n, "Object counts");
  simulate->add_option("--r-list", sim_r, "Size disturbance bounds");
  simulate->add_option("--trials", trial_options.trials)->check(CLI::PositiveNumber);
  simulate->add_option("--points-per-object", trial_options.points_per_object)
      ->check(CLI::PositiveNumber);
  simulate->add_option("--conf-threshold", trial_options.confidence_threshold)
      ->check(CLI::Range(1e-9, 2.0));
  simulate->add_option("--out", sim_out, "CSV path (N,R,trial,rel_error)");

  // simulate-ablation
  std::string abl_priors, abl_out = "ablation.csv";
  AblationOptions ablation_options;
  auto* ablation =
      app.add_subcommand("simulate-ablation", "Raw boxes versus confidence-filtered dimensions");
  ablation->add_option("--priors", abl_priors, "Priors JSON")->required();
  ablation->add_option("--truncation", ablation_options.truncation)
      ->check(CLI::Range(1e-9, 0.999));
  ablation->add_option("--trials", ablation_options.trials)->check(CLI::PositiveNumber);
  ablation->add_option("--n-objects", ablation_options.n_objects)->check(CLI::PositiveNumber);
  ablation->add_option("--points-per-object", ablation_options.points_per_object)
      ->check(CLI::PositiveNumber);
  ablation->add_option("--conf-threshold", ablation_options.confidence_threshold)
      ->check(CLI::Range(1e-9, 2.0));
  ablation->add_option("--out", abl_out, "CSV path (trial,err_full_bbox,err_filtered)");

  // gen-scene
  std::string gen_priors, gen_out;
  SceneOptions scene_options;
  RenderOptions render_options;
  double gen_truncation = 0;
  bool gen_modes = false, gen_no_rotation = false;
  auto* gen = app.add_subcommand("gen-scene", "Write a simulated scene bundle");
  gen->add_option("--priors", gen_priors, "Priors JSON")->required();
  gen->add_option("--out", gen_out, "Bundle directory")->required();
  gen->add_option("--n-objects", scene_options.n_objects)->check(CLI::NonNegativeNumber);
  gen->add_option("--true-scale", scene_options.true_scale, "mm per unit")
      ->check(CLI::PositiveNumber);
  gen->add_option("--truncation", gen_truncation)->check(CLI::Range(0.0, 0.999));
  gen->add_option("--frames", scene_options.num_frames)->check(CLI::Range(2, 100000));
  gen->add_option("--points-per-object", scene_options.points_per_object)
      ->check(CLI::PositiveNumber);
  gen->add_option("--keep-fraction", render_options.keep_fraction)->check(CLI::Range(1e-9, 1.0));
  gen->add_flag("--dims-at-modes", gen_modes, "Place sizes at prior modes");
  gen->add_flag("--no-world-rotation", gen_no_rotation, "Keep the ground plane at z = 0");

  // curve
  std::string curve_report, curve_out = "curve.csv";
  auto* curve = app.add_subcommand("curve", "Likelihood curve of a report as CSV");
  curve->add_option("--report", curve_report, "report.json")->required();
  curve->add_option("--out", curve_out, "CSV path (s,log_likelihood)");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = ApplyConfig(std::move(args));
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return kExitUsage;
    }

    if (*estimate) {
      const std::vector<FrameObservation> frames = LoadSceneBundle(est_scene);
      const CategoryNode repo = LoadPriors(est_priors, g);
      PipelineOptions options;
      options.merge = est_merge.Options(g.seed);
      options.confidence_threshold = est_conf;
      options.threads = g.threads;
      options.record_timings = true;
      const bool explicit_window = est_smin || est_smax || est_ds;
      if (explicit_window) {
        options.window = ScaleWindow{*est_smin, *est_smax, *est_ds};
      }
      const PipelineResult result = RunPipeline(frames, repo, options);
      PipelineOptions report_options = options;
      report_options.record_timings = est_timings;
      WriteJsonFile(est_out, ReportToJson(result, report_options));
      Say(g, "scale: " + Fmt("%.6g", result.estimate.s_hat) + " mm/unit" +
                 (result.estimate.s_refined
                      ? " (refined " + Fmt("%.6g", *result.estimate.s_refined) + ")"
                      : ""));
      Say(g, "objects used: " + std::to_string(result.measured.objects.size()) +
                 ", dropped: " + std::to_string(result.measured.dropped.size()));
      for (const auto& d : result.measured.dropped) {
        Say(g, "  dropped " + std::to_string(d.id) + " (" + JoinCategory(d.category) +
                   "): " + d.reason);
      }
      std::string timing_line = "timings (ms):";
      for (const auto& [name, ms] : result.timings) timing_line += " " + name + "=" + Fmt("%.1f", ms);
      Say(g, timing_line);
      Say(g, "report: " + est_out);
    } else if (*merge) {
      const std::vector<FrameObservation> frames = LoadSceneBundle(merge_scene);
      double threshold = 0;
      const auto objects = MergeStage(frames, merge_flags.Options(g.seed), &threshold);
      WriteJsonFile(merge_out, ObjectsToJson(objects, threshold, merge_points));
      Say(g, "merge threshold " + Fmt("%.6g", threshold) + ", objects: " +
                 std::to_string(objects.size()));
    } else if (*dims) {
      const std::vector<FrameObservation> frames = LoadSceneBundle(dims_scene);
      ObjectsFile file = ObjectsFromJson(ReadJsonFile(dims_objects));
      if (!file.has_points) {
        // Rebuild the clouds from the scene with the recorded threshold.
        SceneMergeOptions options = dims_merge.Options(g.seed);
        options.threshold = file.threshold;
        double threshold = 0;
        std::vector<ObjectCloud> rebuilt = MergeStage(frames, options, &threshold);
        bool consistent = rebuilt.size() == file.objects.size();
        for (size_t i = 0; consistent && i < rebuilt.size(); ++i) {
          consistent = rebuilt[i].category == file.objects[i].category &&
                       rebuilt[i].points.size() == file.point_counts[i];
        }
        OBJSCALE_CHECK(consistent, ErrorCode::kInvalidArgument,
                       "objects file does not match the scene; rerun merge with --points");
        file.objects = std::move(rebuilt);
      }
      std::vector<CameraPose> poses;
      for (const auto& f : frames) poses.push_back(f.pose);
      const Eigen::Vector3d up = EstimateUpVector(poses);
      std::vector<DroppedObject> dropped;
      const auto result =
          DimensionStage(file.objects, up, dims_conf, dims_merge.min_points, &dropped);
      WriteJsonFile(dims_out, DimsToJson(result, up, dims_conf));
      for (const auto& d : result) {
        const DimensionEstimate& e = d.estimate;
        Say(g, std::to_string(d.id) + " " + JoinCategory(d.category) + ": w " +
                   Fmt("%.4g", e.width) + Fmt("(%.2f)", e.Confidence(Dim::kWidth)) + " l " +
                   Fmt("%.4g", e.length) + Fmt("(%.2f)", e.Confidence(Dim::kLength)) + " h " +
                   Fmt("%.4g", e.height) + Fmt("(%.2f)", e.Confidence(Dim::kHeight)));
      }
      for (const auto& d : dropped) Say(g, std::to_string(d.id) + ": " + d.reason);
    } else if (*fit) {
      RepositoryOptions options = fit_options;
      options.seed = g.seed;
      options.fit_missing_priors = false;
      CategoryNode repo = LoadRepository(fit_priors, options);
      if (fit_refit) {
        std::vector<CategoryNode*> stack = {&repo};
        while (!stack.empty()) {
          CategoryNode* node = stack.back();
          stack.pop_back();
          node->prior.reset();
          for (auto& c : node->children) stack.push_back(&c);
        }
      }
      FitMissingPriors(repo, options);
      WriteJsonFile(fit_out, RepositoryToJson(repo));
      for (const auto& leaf : UsableLeaves(repo)) {
        Say(g, JoinCategory(leaf.path) + ": " +
                   std::to_string(leaf.node->prior->NumComponents()) + " component(s)");
      }
    } else if (*simulate) {
      const CategoryNode repo = LoadPriors(sim_priors, g);
      trial_options.n_list = ParseList<int>(sim_n, "--n-list");
      trial_options.r_list = ParseList<double>(sim_r, "--r-list");
      trial_options.seed = g.seed;
      trial_options.threads = g.threads;
      const auto reports = RunTrials(repo, trial_options);
      std::ofstream out = OpenOutput(sim_out);
      out << "N,R,trial,rel_error\n";
      for (const auto& r : reports) {
        for (size_t t = 0; t < r.rel_errors.size(); ++t) {
          out << r.n << ',' << FormatDouble(r.r) << ',' << t << ','
              << (std::isnan(r.rel_errors[t]) ? "nan" : FormatDouble(r.rel_errors[t])) << '\n';
        }
        Say(g, "N=" + std::to_string(r.n) + " R=" + Fmt("%.3g", r.r) + ": median " +
                   Fmt("%.4f", r.summary.median) + " mean " + Fmt("%.4f", r.summary.mean) +
                   " std " + Fmt("%.4f", r.summary.stddev) + " failures " +
                   std::to_string(r.failures));
      }
    } else if (*ablation) {
      const CategoryNode repo = LoadPriors(abl_priors, g);
      ablation_options.seed = g.seed;
      ablation_options.threads = g.threads;
      const AblationReport report = RunAblation(repo, ablation_options);
      std::ofstream out = OpenOutput(abl_out);
      out << "trial,err_full_bbox,err_filtered\n";
      auto cell = [](double v) { return std::isnan(v) ? std::string("nan") : FormatDouble(v); };
      for (size_t t = 0; t < report.err_full_bbox.size(); ++t) {
        out << t << ',' << cell(report.err_full_bbox[t]) << ',' << cell(report.err_filtered[t])
            << '\n';
      }
      Say(g, "mean error, full boxes: " + Fmt("%.4f", report.mean_full_bbox) + " (" +
                 std::to_string(report.failures_full_bbox) + " failed)");
      Say(g, "mean error, filtered:   " + Fmt("%.4f", report.mean_filtered) + " (" +
                 std::to_string(report.failures_filtered) + " failed)");
      Say(g, "ratio: " + Fmt("%.3f", report.mean_full_bbox / report.mean_filtered));
    } else if (*gen) {
      const CategoryNode repo = LoadPriors(gen_priors, g);
      scene_options.seed = g.seed;
      scene_options.dims_at_modes = gen_modes;
      scene_options.random_world_rotation = !gen_no_rotation;
      if (gen_truncation > 0) scene_options.truncation = gen_truncation;
      render_options.seed = DeriveSeed(g.seed, 0x5CE4E);
      const SimScene scene = GenerateScene(repo, scene_options);
      const auto frames = RenderFrames(scene, render_options);
      WriteSceneBundle(gen_out, frames);
      WriteJsonFile(std::filesystem::path(gen_out) / "truth.json", SceneTruthToJson(scene));
      size_t instances = 0;
      for (const auto& f : frames) instances += f.instances.size();
      Say(g, "wrote " + std::to_string(frames.size()) + " frames, " + std::to_string(instances) +
                 " instances, true scale " + Fmt("%.6g", scene.true_scale) + " mm/unit");
    } else if (*curve) {
      const nlohmann::ordered_json report = ReadJsonFile(curve_report);
      OBJSCALE_CHECK(report.is_object() && report.value("version", 0) == 1 &&
                         report.contains("curve"),
                     ErrorCode::kParse, "'" + curve_report + "' is not a version 1 report");
      const auto& c = report["curve"];
      OBJSCALE_CHECK(c.contains("s") && c.contains("log_likelihood") && c["s"].is_array() &&
                         c["s"].size() == c["log_likelihood"].size(),
                     ErrorCode::kParse, "report curve is malformed");
      std::ofstream out = OpenOutput(curve_out);
      out << "s,log_likelihood\n";
      for (size_t i = 0; i < c["s"].size(); ++i) {
        OBJSCALE_CHECK(c["s"][i].is_number() && c["log_likelihood"][i].is_number(),
                       ErrorCode::kParse, "report curve has a non-numeric entry");
        out << FormatDouble(c["s"][i].get<double>()) << ','
            << FormatDouble(c["log_likelihood"][i].get<double>()) << '\n';
      }
      Say(g, "wrote " + std::to_string(c["s"].size()) + " rows to " + curve_out);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << ErrorCodeName(e.code()) << "]: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOk;
}
