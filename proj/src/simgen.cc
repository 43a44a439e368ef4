#include "objscale/simgen.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "objscale/dimensions.h"
#include "objscale/error.h"
#include "objscale/parallel.h"

namespace objscale {
namespace {

constexpr double kPi = std::numbers::pi;

uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Matrix3d RandomRotation(std::mt19937_64& rng) {
  // Uniform unit quaternion (Shoemake).
  const double u1 = Uniform(rng, 0, 1), u2 = Uniform(rng, 0, 1), u3 = Uniform(rng, 0, 1);
  const Eigen::Quaterniond q(std::sqrt(u1) * std::cos(2 * kPi * u3),
                             std::sqrt(1 - u1) * std::sin(2 * kPi * u2),
                             std::sqrt(1 - u1) * std::cos(2 * kPi * u2),
                             std::sqrt(u1) * std::sin(2 * kPi * u3));
  return q.normalized().toRotationMatrix();
}

Eigen::Matrix3d YawRotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

int PickComponent(const Gmm& gmm, std::mt19937_64& rng) {
  const double u = Uniform(rng, 0, 1);
  double acc = 0;
  for (int k = 0; k < gmm.NumComponents(); ++k) {
    acc += gmm.weights[k];
    if (u < acc) return k;
  }
  return gmm.NumComponents() - 1;
}

SizeVector SampleGmm(const Gmm& gmm, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0, 1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const int k = PickComponent(gmm, rng);
    const SizeMatrix lower = Eigen::LLT<SizeMatrix>(gmm.covs[k]).matrixL();
    SizeVector z(gmm.dims);
    for (int i = 0; i < gmm.dims; ++i) z(i) = normal(rng);
    const SizeVector x = gmm.means[k] + lower * z;
    if ((x.array() > 0).all()) return x;
  }
  Throw(ErrorCode::kDegenerate, "size prior keeps producing non-positive sizes");
}

// (w, l, h) in millimeters for one object of the category.
Eigen::Vector3d DrawTrueDims(const CategoryNode& node, const CategoryPath& path,
                             bool at_mode, std::mt19937_64& rng) {
  const Gmm& prior = *node.prior;
  SizeVector drawn;
  if (at_mode) {
    drawn = MixtureMode(prior, prior.means[PickComponent(prior, rng)]);
  } else {
    drawn = SampleGmm(prior, rng);
  }
  const std::vector<Dim> mask = node.dim_mask.Dims();
  Eigen::Vector3d dims = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  for (size_t i = 0; i < mask.size(); ++i) dims(static_cast<int>(mask[i])) = drawn(static_cast<int>(i));
  if (mask.size() < 3) {
    OBJSCALE_CHECK(node.aspect.has_value(), ErrorCode::kInvalidArgument,
                   "category '" + JoinCategory(path) +
                       "' constrains fewer than three dims and has no aspect for simulation");
    double ratio = 0;
    for (const Dim d : mask) ratio += dims(static_cast<int>(d)) / (*node.aspect)(static_cast<int>(d));
    ratio /= static_cast<double>(mask.size());
    for (const Dim d : kAllDims) {
      if (!node.dim_mask.Has(d)) dims(static_cast<int>(d)) = ratio * (*node.aspect)(static_cast<int>(d));
    }
  }
  if (node.shape == ShapeKind::kCylinder) {
    const double diameter = 0.5 * (dims(0) + dims(1));
    dims(0) = dims(1) = diameter;
  } else if (dims(0) > dims(1)) {
    std::swap(dims(0), dims(1));
  }
  return dims;
}

double LocalCoordinate(const Eigen::Vector3d& p, int axis, const Eigen::Vector3d& extents) {
  // extents = (length, width, height); local frame x length, y width, z up.
  if (axis == 2) return p.z() / extents(2);
  return (p(axis) + 0.5 * extents(axis)) / extents(axis);
}

SampledSurface SampleShape(const SimObject& object, size_t n, std::mt19937_64& rng) {
  const Eigen::Vector3d extents = object.TrueExtents();
  if (object.shape == ShapeKind::kCylinder) {
    return SampleCylinderSurface(extents(0), extents(2), n, rng);
  }
  return SampleBoxSurface(extents, n, rng);
}

bool SegmentHitsBox(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                    const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double t0 = 0, t1 = 1;
  const Eigen::Vector3d d = b - a;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d(i)) < 1e-15) {
      if (a(i) < lo(i) || a(i) > hi(i)) return false;
      continue;
    }
    double ta = (lo(i) - a(i)) / d(i);
    double tb = (hi(i) - a(i)) / d(i);
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

bool SegmentHitsCylinder(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double radius,
                         double height) {
  const Eigen::Vector3d d = b - a;
  double t0 = 0, t1 = 1;
  // Slab in z.
  if (std::abs(d.z()) < 1e-15) {
    if (a.z() < 0 || a.z() > height) return false;
  } else {
    double ta = (0 - a.z()) / d.z();
    double tb = (height - a.z()) / d.z();
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  // Infinite cylinder in xy.
  const double qa = d.x() * d.x() + d.y() * d.y();
  const double qb = 2 * (a.x() * d.x() + a.y() * d.y());
  const double qc = a.x() * a.x() + a.y() * a.y() - radius * radius;
  if (qa < 1e-30) return qc <= 0;
  const double disc = qb * qb - 4 * qa * qc;
  if (disc < 0) return false;
  const double root = std::sqrt(disc);
  const double ta = (-qb - root) / (2 * qa);
  const double tb = (-qb + root) / (2 * qa);
  return std::max(t0, ta) <= std::min(t1, tb);
}

// Point and camera center expressed in an object's local millimeter frame.
struct LocalFrame {
  Eigen::Matrix3d to_local;  // scene -> local rotation (includes scale)
  Eigen::Vector3d offset;
  Eigen::Vector3d Apply(const Eigen::Vector3d& scene) const { return to_local * scene - offset; }
};

LocalFrame MakeLocalFrame(const SimScene& scene, const SimObject& object) {
  const Eigen::Matrix3d yaw_t = YawRotation(object.yaw).transpose();
  LocalFrame f;
  f.to_local = yaw_t * scene.world_rotation.transpose() * scene.true_scale;
  f.offset = yaw_t * object.base_mm;
  return f;
}

bool SegmentHitsObject(const SimObject& object, const Eigen::Vector3d& a_local,
                       const Eigen::Vector3d& b_local) {
  const Eigen::Vector3d e = object.TrueExtents();
  if (object.shape == ShapeKind::kCylinder) {
    return SegmentHitsCylinder(a_local, b_local, 0.5 * e(0), e(2));
  }
  return SegmentHitsBox(a_local, b_local, Eigen::Vector3d(-0.5 * e(0), -0.5 * e(1), 0),
                        Eigen::Vector3d(0.5 * e(0), 0.5 * e(1), e(2)));
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double LogUniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::exp(Uniform(rng, std::log(lo), std::log(hi)));
}

std::optional<double> EstimateRelativeError(std::span<const ObjectDimensions> dims,
                                            const CategoryNode& repo,
                                            const SelectionOptions& selection,
                                            double true_scale) {
  const MeasuredObjectSet measured = BuildMeasuredObjects(dims, repo, selection);
  if (measured.objects.empty()) return std::nullopt;
  const ScaleWindow window = AutoWindow(measured.objects);
  const ScaleEstimate est = OptimizeScale(measured.objects, window, 1);
  return std::abs(est.s_hat - true_scale) / true_scale;
}

}  // namespace

uint64_t DeriveSeed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = SplitMix64(seed);
  h = SplitMix64(h ^ a);
  h = SplitMix64(h ^ b);
  h = SplitMix64(h ^ c);
  return h;
}

SizeVector MixtureMode(const Gmm& gmm, const SizeVector& start) {
  std::vector<SizeMatrix> precisions;
  for (const auto& cov : gmm.covs) precisions.push_back(cov.inverse());
  const PreparedGmm prepared(gmm);
  SizeVector x = start;
  std::vector<double> log_r(gmm.NumComponents());
  for (int iteration = 0; iteration < 10000; ++iteration) {
    double max_log = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < gmm.NumComponents(); ++k) {
      Gmm single;
      single.dims = gmm.dims;
      single.weights = {1.0};
      single.means = {gmm.means[k]};
      single.covs = {gmm.covs[k]};
      log_r[k] = std::log(gmm.weights[k]) + LogDensity(single, x);
      max_log = std::max(max_log, log_r[k]);
    }
    SizeMatrix a = SizeMatrix::Zero(gmm.dims, gmm.dims);
    SizeVector b = SizeVector::Zero(gmm.dims);
    for (int k = 0; k < gmm.NumComponents(); ++k) {
      const double r = std::exp(log_r[k] - max_log);
      a += r * precisions[k];
      b += r * precisions[k] * gmm.means[k];
    }
    const SizeVector next = a.ldlt().solve(b);
    const double change = (next - x).norm();
    x = next;
    if (change <= 1e-13 * std::max(1.0, x.norm())) break;
  }
  return x;
}

SampledSurface SampleBoxSurface(const Eigen::Vector3d& extents, size_t n, std::mt19937_64& rng) {
  const double l = extents(0), w = extents(1), h = extents(2);
  // Faces: -x, +x, -y, +y, bottom, top.
  const std::array<double, 6> areas = {w * h, w * h, l * h, l * h, l * w, l * w};
  std::discrete_distribution<int> pick_face(areas.begin(), areas.end());
  SampledSurface out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const int face = pick_face(rng);
    Eigen::Vector3d p(Uniform(rng, -0.5 * l, 0.5 * l), Uniform(rng, -0.5 * w, 0.5 * w),
                      Uniform(rng, 0, h));
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    switch (face) {
      case 0: p.x() = -0.5 * l; normal.x() = -1; break;
      case 1: p.x() = 0.5 * l; normal.x() = 1; break;
      case 2: p.y() = -0.5 * w; normal.y() = -1; break;
      case 3: p.y() = 0.5 * w; normal.y() = 1; break;
      case 4: p.z() = 0; normal.z() = -1; break;
      default: p.z() = h; normal.z() = 1; break;
    }
    out.points.push_back(p);
    out.normals.push_back(normal);
  }
  return out;
}

SampledSurface SampleCylinderSurface(double diameter, double height, size_t n,
                                     std::mt19937_64& rng) {
  const double r = 0.5 * diameter;
  const std::array<double, 3> areas = {kPi * diameter * height, kPi * r * r, kPi * r * r};
  std::discrete_distribution<int> pick_part(areas.begin(), areas.end());
  SampledSurface out;
  out.points.reserve(n);
  out.normals.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const int part = pick_part(rng);
    const double theta = Uniform(rng, 0, 2 * kPi);
    if (part == 0) {
      out.points.emplace_back(r * std::cos(theta), r * std::sin(theta), Uniform(rng, 0, height));
      out.normals.emplace_back(std::cos(theta), std::sin(theta), 0);
    } else {
      const double rho = r * std::sqrt(Uniform(rng, 0, 1));
      const bool top = part == 1;
      out.points.emplace_back(rho * std::cos(theta), rho * std::sin(theta), top ? height : 0.0);
      out.normals.emplace_back(0, 0, top ? 1 : -1);
    }
  }
  return out;
}

PointCloud SampleCylinderVolume(double diameter, double height, size_t n, std::mt19937_64& rng) {
  const double r = 0.5 * diameter;
  PointCloud out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const double rho = r * std::sqrt(Uniform(rng, 0, 1));
    const double theta = Uniform(rng, 0, 2 * kPi);
    out.emplace_back(rho * std::cos(theta), rho * std::sin(theta), Uniform(rng, 0, height));
  }
  return out;
}

double TruncationKeepProbability(double u, double truncation) {
  if (truncation <= 0) return 1;
  const double cut = 1 - truncation;
  if (u > cut) return 0;
  const double band = 0.5 * truncation;
  const double depth = (cut - u) / band;
  return depth >= 1 ? 1 : depth * depth;
}

SimScene GenerateScene(const CategoryNode& repo, const SceneOptions& options) {
  OBJSCALE_CHECK(options.n_objects >= 0, ErrorCode::kInvalidArgument,
                 "object count must be non-negative");
  OBJSCALE_CHECK(options.true_scale > 0, ErrorCode::kInvalidArgument,
                 "true scale must be positive");
  OBJSCALE_CHECK(!options.truncation || (*options.truncation >= 0 && *options.truncation < 1),
                 ErrorCode::kInvalidArgument, "truncation must lie in [0, 1)");
  OBJSCALE_CHECK(options.num_frames >= 2, ErrorCode::kInvalidArgument,
                 "trajectory needs at least two frames");
  std::mt19937_64 rng(options.seed);
  SimScene scene;
  scene.true_scale = options.true_scale;
  scene.seed = options.seed;

  const std::vector<CategoryRef> leaves = UsableLeaves(repo);
  OBJSCALE_CHECK(options.n_objects == 0 || !leaves.empty(), ErrorCode::kInvalidArgument,
                 "repository has no category with a size prior");
  std::uniform_int_distribution<size_t> pick_leaf(0, leaves.empty() ? 0 : leaves.size() - 1);
  for (int i = 0; i < options.n_objects; ++i) {
    const CategoryRef& leaf = leaves[pick_leaf(rng)];
    SimObject object;
    object.category = leaf.path;
    object.shape = leaf.node->shape;
    object.true_dims_mm = DrawTrueDims(*leaf.node, leaf.path, options.dims_at_modes, rng);
    object.yaw = Uniform(rng, 0, 2 * kPi);
    scene.objects.push_back(std::move(object));
  }

  // Non-overlapping footprints on the ground plane.
  std::vector<double> radius;
  double area = 0, max_height = 0;
  for (const auto& o : scene.objects) {
    const Eigen::Vector3d e = o.TrueExtents();
    radius.push_back(0.5 * std::hypot(e(0), e(1)));
    area += kPi * std::pow(1.3 * radius.back(), 2);
    max_height = std::max(max_height, e(2));
  }
  // A crowded draw that cannot be placed retries on a larger region.
  double side = std::sqrt(4 * area);
  bool all_placed = false;
  for (int round = 0; round < 10 && !all_placed; ++round) {
    if (round > 0) side *= 1.25;
    all_placed = true;
    for (size_t i = 0; i < scene.objects.size() && all_placed; ++i) {
      const double half = std::max(0.0, 0.5 * side - radius[i]);
      bool placed = false;
      for (int attempt = 0; attempt < options.max_placement_retries && !placed; ++attempt) {
        const Eigen::Vector3d candidate(Uniform(rng, -half, half + 1e-12),
                                        Uniform(rng, -half, half + 1e-12), 0);
        placed = true;
        for (size_t j = 0; j < i; ++j) {
          const double clearance = 0.3 * std::max(radius[i], radius[j]);
          if ((candidate - scene.objects[j].base_mm).norm() < radius[i] + radius[j] + clearance) {
            placed = false;
            break;
          }
        }
        if (placed) scene.objects[i].base_mm = candidate;
      }
      all_placed = placed;
    }
  }
  OBJSCALE_CHECK(all_placed, ErrorCode::kDegenerate,
                 "cannot place objects without overlap after the maximum number of retries");

  scene.world_rotation =
      options.random_world_rotation ? RandomRotation(rng) : Eigen::Matrix3d::Identity();

  // Circular zero-roll trajectory looking at the scene center.
  const double extent = std::max({side, 1.5 * max_height, 1.0});
  const double orbit = 1.6 * extent;
  const double elevation = 1.0 * extent;
  const Eigen::Vector3d target(0, 0, 0.3 * max_height);
  for (int f = 0; f < options.num_frames; ++f) {
    const double angle = 2 * kPi * f / options.num_frames;
    const Eigen::Vector3d eye(orbit * std::cos(angle), orbit * std::sin(angle), elevation);
    const CameraPose ground = CameraPose::LookAt(eye, target, Eigen::Vector3d::UnitZ(), 525,
                                                 525, 319.5, 239.5, 640, 480);
    CameraPose pose = ground;
    pose.rotation = ground.rotation * scene.world_rotation.transpose();
    pose.translation = ground.translation / scene.true_scale;
    scene.trajectory.push_back(pose);
  }

  // Surface samples, optionally truncated, moved into scene coordinates.
  std::uniform_int_distribution<int> pick_axis(0, 2);
  for (auto& object : scene.objects) {
    std::optional<double> truncation = options.truncation;
    if (truncation && *truncation > 0) {
      object.truncated_axis =
          options.truncation_dim ? AxisOf(*options.truncation_dim) : pick_axis(rng);
    }
    const Eigen::Vector3d extents = object.TrueExtents();
    const Eigen::Matrix3d placement = scene.world_rotation * YawRotation(object.yaw);
    while (object.points.size() < options.points_per_object) {
      const SampledSurface batch = SampleShape(object, options.points_per_object, rng);
      for (size_t i = 0; i < batch.points.size() &&
                         object.points.size() < options.points_per_object;
           ++i) {
        const Eigen::Vector3d& p = batch.points[i];
        if (object.truncated_axis >= 0) {
          const double keep = TruncationKeepProbability(
              LocalCoordinate(p, object.truncated_axis, extents), *truncation);
          if (keep < 1 && Uniform(rng, 0, 1) >= keep) continue;
        }
        object.points.push_back(scene.ToScene(YawRotation(object.yaw) * p + object.base_mm));
        object.normals.push_back(placement * batch.normals[i]);
      }
    }
  }
  return scene;
}

std::vector<FrameObservation> RenderFrames(const SimScene& scene, const RenderOptions& options) {
  OBJSCALE_CHECK(options.keep_fraction > 0 && options.keep_fraction <= 1,
                 ErrorCode::kInvalidArgument, "keep fraction must lie in (0, 1]");
  std::vector<LocalFrame> frames_local;
  for (const auto& o : scene.objects) frames_local.push_back(MakeLocalFrame(scene, o));

  std::vector<FrameObservation> frames;
  for (size_t f = 0; f < scene.trajectory.size(); ++f) {
    const CameraPose& pose = scene.trajectory[f];
    std::mt19937_64 rng(DeriveSeed(options.seed, f));
    const Eigen::Vector3d center = pose.Center();

    struct Visible {
      Eigen::Vector3d point;
      size_t object;
      int pixel;
    };
    std::vector<Visible> visible;
    std::vector<Eigen::Vector3d> center_local;
    for (const auto& lf : frames_local) center_local.push_back(lf.Apply(center));
    for (size_t j = 0; j < scene.objects.size(); ++j) {
      const SimObject& object = scene.objects[j];
      for (size_t i = 0; i < object.points.size(); ++i) {
        const Eigen::Vector3d& p = object.points[i];
        if (object.normals[i].dot(center - p) <= 0) continue;
        const auto pixel = pose.Project(p);
        if (!pixel) continue;
        const int x = PixelIndex(pixel->x()), y = PixelIndex(pixel->y());
        if (x < 0 || y < 0 || x >= pose.width || y >= pose.height) continue;
        bool occluded = false;
        for (size_t k = 0; k < scene.objects.size() && !occluded; ++k) {
          if (k == j) continue;
          occluded = SegmentHitsObject(scene.objects[k], center_local[k],
                                       frames_local[k].Apply(p));
        }
        if (occluded) continue;
        if (Uniform(rng, 0, 1) >= options.keep_fraction) continue;
        visible.push_back({p, j, y * pose.width + x});
      }
    }

        // Pixels hit by points of more than one object belong to no mask.
    constexpr int kUnowned = -1, kShared = -2;
    std::vector<int> owner(static_cast<size_t>(pose.width) * pose.height, kUnowned);
    for (const auto& v : visible) {
      int& o = owner[v.pixel];
      if (o == kUnowned) {
        o = static_cast<int>(v.object);
      } else if (o != static_cast<int>(v.object)) {
        o = kShared;
      }
    }
    PointCloud frame_cloud;
    frame_cloud.reserve(visible.size());
    for (const auto& v : visible) frame_cloud.push_back(v.point);

    FrameObservation frame;
    frame.frame_id = static_cast<int>(f);
    frame.pose = pose;
    if (frame_cloud.empty()) {
      frames.push_back(std::move(frame));
      continue;
    }
    for (size_t j = 0; j < scene.objects.size(); ++j) {
      Mask2D mask(pose.width, pose.height);
      bool any = false;
      for (size_t px = 0; px < owner.size(); ++px) {
        if (owner[px] == static_cast<int>(j)) {
          mask.Set(static_cast<int>(px % pose.width), static_cast<int>(px / pose.width));
          any = true;
        }
      }
      if (!any) continue;
      PointCloud labeled = LabelPoints(frame_cloud, pose, mask);
      if (labeled.size() < options.min_instance_points) continue;
      Instance inst;
      inst.instance_id = static_cast<int>(frame.instances.size());
      inst.category = scene.objects[j].category;
      inst.points = std::move(labeled);
      frame.instances.push_back(std::move(inst));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<ObjectDimensions> MeasureSimObjects(const SimScene& scene,
                                                double confidence_threshold) {
  const Eigen::Vector3d up = EstimateUpVector(scene.trajectory);
  std::vector<ObjectDimensions> out;
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    ObjectDimensions d;
    d.id = static_cast<int>(i);
    d.category = scene.objects[i].category;
    d.estimate = MeasureObject(scene.objects[i].points, up, confidence_threshold);
    out.push_back(std::move(d));
  }
  return out;
}

TrialSummary Summarize(const std::vector<double>& values) {
  std::vector<double> finite;
  for (const double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  TrialSummary s;
  if (finite.empty()) {
    s.mean = s.median = s.stddev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const double n = static_cast<double>(finite.size());
  s.mean = std::accumulate(finite.begin(), finite.end(), 0.0) / n;
  double var = 0;
  for (const double v : finite) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / n);
  s.median = Median(finite);
  return s;
}

std::vector<TrialReport> RunTrials(const CategoryNode& repo, const TrialOptions& options) {
  OBJSCALE_CHECK(options.trials >= 1, ErrorCode::kInvalidArgument, "trials must be at least 1");
  std::vector<TrialReport> reports;
  for (const int n : options.n_list) {
    OBJSCALE_CHECK(n >= 1, ErrorCode::kInvalidArgument, "object counts must be positive");
    for (size_t ri = 0; ri < options.r_list.size(); ++ri) {
      const double r = options.r_list[ri];
      OBJSCALE_CHECK(r >= 0 && r < 1, ErrorCode::kInvalidArgument,
                     "disturbance bound must lie in [0, 1)");
      TrialReport report;
      report.n = n;
      report.r = r;
      report.trials = options.trials;
      report.rel_errors.assign(options.trials, std::numeric_limits<double>::quiet_NaN());
      ParallelFor(static_cast<size_t>(options.trials), options.threads, [&](size_t t) {
        const uint64_t trial_seed = DeriveSeed(options.seed, static_cast<uint64_t>(n), ri, t);
        std::mt19937_64 rng(DeriveSeed(trial_seed, 1));
        SceneOptions scene_options;
        scene_options.n_objects = n;
        scene_options.true_scale = LogUniform(rng, options.scale_min, options.scale_max);
        scene_options.seed = trial_seed;
        scene_options.points_per_object = options.points_per_object;
        scene_options.dims_at_modes = options.dims_at_modes;
        scene_options.num_frames = 8;
        const SimScene scene = GenerateScene(repo, scene_options);
        std::vector<ObjectDimensions> dims = MeasureSimObjects(scene, options.confidence_threshold);
        if (r > 0) {
          for (auto& d : dims) {
            d.estimate.length *= Uniform(rng, 1 - r, 1 + r);
            d.estimate.width *= Uniform(rng, 1 - r, 1 + r);
            d.estimate.height *= Uniform(rng, 1 - r, 1 + r);
          }
        }
        SelectionOptions selection;
        selection.confidence_threshold = options.confidence_threshold;
        const auto err = EstimateRelativeError(dims, repo, selection, scene.true_scale);
        if (err) report.rel_errors[t] = *err;
      });
      for (const double e : report.rel_errors) report.failures += std::isnan(e) ? 1 : 0;
      report.summary = Summarize(report.rel_errors);
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

AblationReport RunAblation(const CategoryNode& repo, const AblationOptions& options) {
  OBJSCALE_CHECK(options.trials >= 1, ErrorCode::kInvalidArgument, "trials must be at least 1");
  OBJSCALE_CHECK(options.truncation > 0 && options.truncation < 1, ErrorCode::kInvalidArgument,
                 "ablation truncation must lie in (0, 1)");
  AblationReport report;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.err_full_bbox.assign(options.trials, nan);
  report.err_filtered.assign(options.trials, nan);
  ParallelFor(static_cast<size_t>(options.trials), options.threads, [&](size_t t) {
    const uint64_t trial_seed = DeriveSeed(options.seed, 0xAB1A7E, t);
    std::mt19937_64 rng(DeriveSeed(trial_seed, 1));
    SceneOptions scene_options;
    scene_options.n_objects = options.n_objects;
    scene_options.true_scale = LogUniform(rng, options.scale_min, options.scale_max);
    scene_options.truncation = options.truncation;
    scene_options.seed = trial_seed;
    scene_options.points_per_object = options.points_per_object;
    scene_options.num_frames = 8;
    const SimScene scene = GenerateScene(repo, scene_options);
    const std::vector<ObjectDimensions> dims =
        MeasureSimObjects(scene, options.confidence_threshold);
    SelectionOptions full;
    full.use_confidence = false;
    SelectionOptions filtered;
    filtered.confidence_threshold = options.confidence_threshold;
    if (auto e = EstimateRelativeError(dims, repo, full, scene.true_scale)) {
      report.err_full_bbox[t] = *e;
    }
    if (auto e = EstimateRelativeError(dims, repo, filtered, scene.true_scale)) {
      report.err_filtered[t] = *e;
    }
  });
  for (int t = 0; t < options.trials; ++t) {
    report.failures_full_bbox += std::isnan(report.err_full_bbox[t]) ? 1 : 0;
    report.failures_filtered += std::isnan(report.err_filtered[t]) ? 1 : 0;
  }
  report.mean_full_bbox = Summarize(report.err_full_bbox).mean;
  report.mean_filtered = Summarize(report.err_filtered).mean;
  return report;
}

}  // namespace objscale
