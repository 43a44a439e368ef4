// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "objscale/dimensions.h"
#include "objscale/error.h"
#include "objscale/geometry.h"
#include "objscale/gmm.h"
#include "objscale/json_writer.h"
#include "objscale/merging.h"
#include "objscale/metric_tree.h"
#include "objscale/pipeline.h"
#include "objscale/scale.h"
#include "objscale/simgen.h"
#include "oracles.h"
#include "test_util.h"

namespace objscale {
namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buffer[256];
  std::snprintf(buffer, sizeof(buffer), format, a, b, c, d);
  return buffer;
}

double MedianOf(std::vector<double> v) {
  std::erase_if(v, [](double x) { return std::isnan(x); });
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n == 0) return std::nan("");
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. Noise-free recovery on 50 scenes.
Outcome NoiseFreeRecovery(const CategoryNode& repo) {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> log_scale(std::log(20.0), std::log(2000.0));
  Outcome out;
  double worst_margin = -1;
  int failed = 0;
  for (int scene_index = 0; scene_index < 50; ++scene_index) {
    SceneOptions options;
    options.n_objects = 5;
    options.true_scale = std::exp(log_scale(rng));
    options.seed = DeriveSeed(1, static_cast<uint64_t>(scene_index));
    options.dims_at_modes = true;
    const SimScene scene = GenerateScene(repo, options);
    const auto dims = MeasureSimObjects(scene, kDefaultConfidenceThreshold);
    const auto measured = BuildMeasuredObjects(dims, repo);
    const ScaleEstimate est = OptimizeScale(measured.objects, AutoWindow(measured.objects));
    const double s = scene.true_scale;
    const double error = std::abs(est.s_hat - s) / s;
    const double bound = est.window.step / s + 0.01;
    worst_margin = std::max(worst_margin, error - bound);
    if (error > bound) ++failed;
  }
  const double elapsed = Seconds(start);
  out.pass = failed == 0 && elapsed < 10;
  out.detail = Fmt("50 scenes, %.0f over bound, worst (error - bound) = %.4f, %.2f s", failed,
                   worst_margin, elapsed);
  return out;
}

// 2. Error against N at R = 0.15.
Outcome ErrorVersusN(const CategoryNode& repo) {
  const auto start = Clock::now();
  TrialOptions options;
  options.n_list = {1, 2, 5, 10};
  options.r_list = {0.15};
  options.trials = 500;
  options.seed = 42;
  const auto reports = RunTrials(repo, options);
  const double elapsed = Seconds(start);
  Outcome out;
  std::string medians;
  int failures = 0;
  for (size_t i = 0; i < reports.size(); ++i) {
    medians += Fmt("%.4f ", reports[i].summary.median);
    failures += reports[i].failures;
    if (i > 0 && !(reports[i].summary.median < reports[i - 1].summary.median)) out.pass = false;
  }
  out.pass = out.pass && reports.back().summary.median <= 0.06 && elapsed < 300;
  out.detail = "medians N=1,2,5,10: " + medians + Fmt("(failed trials %.0f), %.1f s", failures,
                                                     elapsed);
  return out;
}

// 3. Raw boxes against confidence-filtered dimensions on truncated scenes.
Outcome Ablation(const CategoryNode& repo) {
  const auto start = Clock::now();
  AblationOptions options;
  options.trials = 200;
  options.truncation = 0.4;
  const AblationReport report = RunAblation(repo, options);
  Outcome out;
  const double ratio = report.mean_full_bbox / report.mean_filtered;
  out.pass = ratio >= 2;
  out.detail = Fmt("mean error full %.4f, filtered %.4f, ratio %.2f, ", report.mean_full_bbox,
                   report.mean_filtered, ratio) +
               Fmt("failed scenes %.0f / %.0f, %.1f s", report.failures_full_bbox,
                   report.failures_filtered, Seconds(start));
  return out;
}

// 4. Oracle equivalences.
Outcome Oracles() {
  std::mt19937_64 rng(4);
  Outcome out;

  double worst_distance = 0;
  std::uniform_int_distribution<int> size(20, 300);
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud a = testing::RandomCloud(rng, size(rng));
    const PointCloud b = testing::RandomCloud(rng, size(rng), 2.0, {0.5, -0.3, 0.1});
    worst_distance = std::max(
        worst_distance, std::abs(CloudDistance(a, b) - testing::BruteForceCloudDistance(a, b)));
  }

  double worst_area = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = testing::RandomPlanarPoints(rng, 50);
    const MinAreaRect rect = ComputeMinAreaRect(pts);
    worst_area = std::max(worst_area,
                          std::abs(rect.length * rect.width / testing::MinRectAreaOracle(pts) - 1));
  }

  double worst_angle = 0;
  for (int set = 0; set < 100; ++set) {
    const auto poses = testing::NoisyLevelPoses(rng, 50, 0.01);
    worst_angle = std::max(worst_angle, testing::AngleBetween(EstimateUpVector(poses),
                                                              testing::UpVectorOracle(poses)));
  }

  std::vector<MeasuredObject> objects(2);
  const double l[2] = {1000, 2000}, mu[2] = {2000, 4000}, sigma[2] = {100, 200};
  for (int i = 0; i < 2; ++i) {
    objects[i].id = i;
    objects[i].dims = {Dim::kHeight};
    objects[i].values = testing::Vec({l[i]});
    objects[i].prior = testing::Gaussian1D(mu[i], sigma[i]);
  }
  const double s_star = testing::GaussianProductMaximizer({l[0], l[1]}, {mu[0], mu[1]},
                                                          {sigma[0], sigma[1]});
  ScaleWindow window;
  window.s_min = 0.5;
  window.s_max = 5;
  window.step = 0.0005;
  const double s_hat = OptimizeScale(objects, window).s_hat;

  out.pass = worst_distance <= 1e-12 && worst_area <= 1e-9 && worst_angle <= 1e-6 &&
             std::abs(s_hat - s_star) <= window.step && std::abs(s_star - 2.0) < 1e-12;
  out.detail = Fmt("(a) %.1e (b) %.1e (c) %.1e rad ", worst_distance, worst_area, worst_angle) +
               Fmt("(d) s_hat %.4f vs %.4f", s_hat, s_star);
  return out;
}

// 5. Invariants.
Outcome Invariants(const CategoryNode& repo) {
  Outcome out;
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& name) {
    if (!ok) failed.push_back(name);
  };
  std::mt19937_64 rng(5);

  // Point conservation under merging, on rendered scenes.
  bool conserved = true;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    SceneOptions options;
    options.n_objects = 4;
    options.seed = 50 + seed;
    options.num_frames = 8;
    options.points_per_object = 2000;
    const SimScene scene = GenerateScene(repo, options);
    RenderOptions render;
    render.seed = seed;
    const auto frames = RenderFrames(scene, render);
    std::multiset<std::tuple<double, double, double>> input, output;
    for (const auto& f : frames) {
      for (const auto& inst : f.instances) {
        for (const auto& p : inst.points) input.insert({p.x(), p.y(), p.z()});
      }
    }
    for (const auto& o : MergeFrames(frames, ResolveMergeThreshold(frames, {}))) {
      for (const auto& p : o.points) output.insert({p.x(), p.y(), p.z()});
    }
    conserved = conserved && input == output;
  }
  check(conserved, "point conservation");

  // Confidence is unchanged by uniform scaling.
  double worst_eta = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const SampledSurface box = SampleBoxSurface({3, 2, 1}, 4000, rng);
    const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    const auto ref = MeasureObject(box.points, up).confidence;
    const double c = std::exp(std::uniform_real_distribution<double>(-5, 5)(rng));
    PointCloud scaled;
    for (const auto& p : box.points) scaled.push_back(c * p);
    const auto eta = MeasureObject(scaled, up).confidence;
    for (int a = 0; a < 3; ++a) worst_eta = std::max(worst_eta, std::abs(eta[a] - ref[a]));
  }
  check(worst_eta <= 1e-9, "eta scale invariance");

  // Confidence decreases under truncation. Removing the top 40% of a uniform
  // box empties the top slab of its grid; re-measured surface boxes lose
  // density in the truncated slab as the cut grows.
  bool decreasing = true;
  std::uniform_real_distribution<double> side(0.3, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    const PointCloud solid = testing::RandomCloud(rng, 8000);
    const DimensionEstimate box = MeasureObject(solid, up);
    PointCloud cut;
    for (const auto& p : solid) {
      if (p.z() <= 0.6) cut.push_back(p);
    }
    decreasing = decreasing && DimensionConfidence(cut, box)[2] < box.confidence[2];
    const Eigen::Vector3d extents(side(rng), side(rng), side(rng));
    double previous = INFINITY;
    for (const double t : {0.0, 0.2, 0.4}) {
      const double eta_z =
          MeasureObject(testing::TruncatedBoxSurface(rng, extents, t), up).confidence[2];
      decreasing = decreasing && eta_z < previous;
      previous = eta_z;
    }
  }
  check(decreasing, "confidence under truncation");

  // EM log-likelihood never decreases.
  bool monotone = true;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 sample_rng(seed);
    std::normal_distribution<double> n(0, 1);
    std::vector<SizeVector> samples;
    for (int i = 0; i < 300; ++i) {
      const int mode = i % 3;
      samples.push_back(testing::Vec({400.0 + 150 * mode + 25 * n(sample_rng),
                                      800.0 - 100 * mode + 40 * n(sample_rng),
                                      700.0 + 30 * n(sample_rng)}));
    }
    GmmFitOptions options;
    options.seed = seed;
    const auto trace = FitGmm(samples, options).log_likelihood_trace;
    for (size_t i = 1; i < trace.size(); ++i) {
      monotone = monotone && trace[i] >= trace[i - 1] - 1e-9 * std::abs(trace[i - 1]);
    }
  }
  check(monotone, "EM monotonicity");

  // Marginal density against Simpson quadrature over the dropped axis.
  double worst_marginal = 0;
  for (const auto& leaf : UsableLeaves(repo)) {
    const Gmm& g = *leaf.node->prior;
    if (g.dims < 2) continue;
    const int dropped = g.dims - 1;
    std::vector<int> keep;
    for (int d = 0; d < dropped; ++d) keep.push_back(d);
    const Gmm m = Marginalize(g, keep);
    double lo = INFINITY, hi = -INFINITY;
    for (int k = 0; k < g.NumComponents(); ++k) {
      const double sd = std::sqrt(g.covs[k](dropped, dropped));
      lo = std::min(lo, g.means[k](dropped) - 12 * sd);
      hi = std::max(hi, g.means[k](dropped) + 12 * sd);
    }
    SizeVector probe = m.means[0];
    const int n = 20000;
    const double h = (hi - lo) / n;
    double integral = 0;
    for (int i = 0; i <= n; ++i) {
      SizeVector x(g.dims);
      x.head(dropped) = probe;
      x(dropped) = lo + i * h;
      integral += ((i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2)) * Density(g, x);
    }
    integral *= h / 3;
    worst_marginal = std::max(worst_marginal, std::abs(Density(m, probe) / integral - 1));
  }
  check(worst_marginal <= 1e-4, "marginalization vs quadrature");

  // Byte-identical reports under a fixed seed.
  SceneOptions options;
  options.n_objects = 4;
  options.seed = 77;
  options.dims_at_modes = true;
  options.points_per_object = 3000;
  const SimScene scene = GenerateScene(repo, options);
  RenderOptions render;
  render.seed = 78;
  PipelineOptions pipeline;
  const std::string first =
      DumpJson(ReportToJson(RunPipeline(RenderFrames(scene, render), repo, pipeline), pipeline));
  const std::string second = DumpJson(ReportToJson(
      RunPipeline(RenderFrames(GenerateScene(repo, options), render), repo, pipeline), pipeline));
  check(first == second, "deterministic reports");

  out.pass = failed.empty();
  out.detail = Fmt("eta drift %.1e, marginal rel. error %.1e", worst_eta, worst_marginal);
  for (const auto& f : failed) out.detail += "; failed: " + f;
  return out;
}

// 6. Tilted cylinder confidence.
Outcome TiltedCylinder() {
  std::mt19937_64 rng(6);
  Outcome out;
  std::vector<double> eta;
  for (const double degrees : {0.0, 30.0, 45.0}) {
    const PointCloud cloud = testing::TiltedCylinder(rng, degrees * M_PI / 180);
    eta.push_back(MeasureObject(cloud, Eigen::Vector3d::UnitZ()).confidence[2]);
  }
  out.pass = eta[0] > eta[1] && eta[1] > eta[2];
  out.detail = Fmt("eta_z at 0/30/45 deg: %.3f %.3f %.3f", eta[0], eta[1], eta[2]);
  return out;
}

}  // namespace
}  // namespace objscale

int main() {
  using namespace objscale;
  const CategoryNode repo = LoadRepository(testing::DataPath("sample_priors.json"));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 noise-free recovery", [&] { return NoiseFreeRecovery(repo); }},
      {"2 error versus object count", [&] { return ErrorVersusN(repo); }},
      {"3 truncation ablation", [&] { return Ablation(repo); }},
      {"4 oracle equivalences", [] { return Oracles(); }},
      {"5 invariants", [&] { return Invariants(repo); }},
      {"6 tilted cylinder confidence", [] { return TiltedCylinder(); }},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s: %s\n", outcome.pass ? "PASS" : "FAIL", name.c_str(),
                outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
