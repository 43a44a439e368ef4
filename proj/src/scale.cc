#include "objscale/scale.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "objscale/error.h"
#include "objscale/parallel.h"

namespace objscale {
namespace {

struct PreparedObject {
  int id;
  SizeVector values;
  PreparedGmm prior;
};

std::vector<PreparedObject> Prepare(std::span<const MeasuredObject> objects) {
  std::vector<size_t> order(objects.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return objects[a].id < objects[b].id; });
  std::vector<PreparedObject> prepared;
  prepared.reserve(objects.size());
  for (const size_t i : order) {
    const MeasuredObject& o = objects[i];
    OBJSCALE_CHECK(!o.dims.empty() && o.values.size() == static_cast<int>(o.dims.size()) &&
                       o.prior.dims == o.values.size(),
                   ErrorCode::kInvalidArgument,
                   "measured object " + std::to_string(o.id) + " is inconsistent");
    prepared.push_back({o.id, o.values, PreparedGmm(o.prior)});
  }
  return prepared;
}

double Term(const PreparedObject& o, double s) {
  const double v = o.prior.LogDensity(s * o.values);
  return std::isnan(v) ? kLogTermFloor : std::max(v, kLogTermFloor);
}

double Sum(const std::vector<PreparedObject>& prepared, double s) {
  double total = 0;
  for (const auto& o : prepared) total += Term(o, s);
  return total;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MeasuredObjectSet BuildMeasuredObjects(std::span<const ObjectDimensions> dims,
                                       const CategoryNode& root,
                                       const SelectionOptions& options) {
  MeasuredObjectSet result;
  for (const auto& object : dims) {
    const CategoryNode& node = Lookup(root, object.category);
    if (!node.prior) {
      result.dropped.push_back({object.id, object.category, "category has no size prior"});
      continue;
    }
    const std::vector<Dim> mask_dims = node.dim_mask.Dims();
    std::vector<Dim> used;
    std::vector<int> keep;
    for (size_t i = 0; i < mask_dims.size(); ++i) {
      const Dim d = mask_dims[i];
      if (options.use_confidence && !object.estimate.Reliable(d)) continue;
      used.push_back(d);
      keep.push_back(static_cast<int>(i));
    }
    if (used.empty()) {
      const bool any_reliable = object.estimate.reliable[0] || object.estimate.reliable[1] ||
                                object.estimate.reliable[2];
      result.dropped.push_back(
          {object.id, object.category,
           any_reliable ? "no reliable dimension is constrained by the category prior"
                        : "all dimensions unreliable"});
      continue;
    }
    MeasuredObject m;
    m.id = object.id;
    m.category = object.category;
    m.dims = used;
    m.values.resize(static_cast<int>(used.size()));
    for (size_t i = 0; i < used.size(); ++i) {
      m.values(static_cast<int>(i)) = object.estimate.Value(used[i]);
    }
    m.prior = Marginalize(*node.prior, keep);
    result.objects.push_back(std::move(m));
  }
  return result;
}

double LogPosterior(std::span<const MeasuredObject> objects, double s) {
  OBJSCALE_CHECK(std::isfinite(s) && s > 0, ErrorCode::kInvalidArgument,
                 "scale candidate must be positive");
  OBJSCALE_CHECK(!objects.empty(), ErrorCode::kNoObjects, "no measured objects");
  return Sum(Prepare(objects), s);
}

size_t ScaleWindow::NumPoints() const {
  return static_cast<size_t>(std::floor((s_max - s_min) / step + 1e-9)) + 1;
}

void ScaleWindow::Validate() const {
  OBJSCALE_CHECK(std::isfinite(s_min) && std::isfinite(s_max) && std::isfinite(step),
                 ErrorCode::kInvalidArgument, "scale window must be finite");
  OBJSCALE_CHECK(s_min > 0 && s_min < s_max, ErrorCode::kInvalidArgument,
                 "scale window needs 0 < s_min < s_max");
  OBJSCALE_CHECK(step > 0, ErrorCode::kInvalidArgument, "scale step must be positive");
  OBJSCALE_CHECK((s_max - s_min) / step <= 1e8, ErrorCode::kInvalidArgument,
                 "scale window has too many grid points");
}

ScaleEstimate OptimizeScale(std::span<const MeasuredObject> objects, const ScaleWindow& window,
                            int threads) {
  OBJSCALE_CHECK(!objects.empty(), ErrorCode::kNoObjects,
                 "scale estimation needs at least one measured object");
  window.Validate();
  const std::vector<PreparedObject> prepared = Prepare(objects);

  ScaleEstimate est;
  est.window = window;
  const size_t n = window.NumPoints();
  est.grid_s.resize(n);
  est.grid_log_likelihood.resize(n);
  ParallelFor(n, threads, [&](size_t i) {
    const double s = window.At(i);
    est.grid_s[i] = s;
    est.grid_log_likelihood[i] = Sum(prepared, s);
  });

  size_t best = 0;
  for (size_t i = 1; i < n; ++i) {
    if (est.grid_log_likelihood[i] > est.grid_log_likelihood[best]) best = i;
  }
  est.argmax_index = best;
  est.s_hat = est.grid_s[best];
  if (best > 0 && best + 1 < n) {
    const double ym = est.grid_log_likelihood[best - 1];
    const double y0 = est.grid_log_likelihood[best];
    const double yp = est.grid_log_likelihood[best + 1];
    const double curvature = ym - 2 * y0 + yp;
    if (curvature < 0) {
      est.s_refined = est.s_hat + 0.5 * (ym - yp) / curvature * window.step;
    }
  }
  for (const auto& o : prepared) est.per_object.push_back({o.id, Term(o, est.s_hat)});
  return est;
}

std::vector<double> CandidateScales(std::span<const MeasuredObject> objects) {
  std::vector<double> candidates;
  for (const auto& o : objects) {
    for (int k = 0; k < o.prior.NumComponents(); ++k) {
      std::vector<double> ratios;
      for (int d = 0; d < o.values.size(); ++d) {
        OBJSCALE_CHECK(o.values(d) > 0, ErrorCode::kInvalidArgument,
                       "measured dimensions must be positive");
        ratios.push_back(o.prior.means[k](d) / o.values(d));
      }
      candidates.push_back(Median(std::move(ratios)));
    }
  }
  return candidates;
}

ScaleWindow AutoWindow(std::span<const MeasuredObject> objects) {
  OBJSCALE_CHECK(!objects.empty(), ErrorCode::kNoObjects,
                 "automatic window needs at least one measured object");
  const std::vector<double> candidates = CandidateScales(objects);
  const auto [lo, hi] = std::minmax_element(candidates.begin(), candidates.end());
  OBJSCALE_CHECK(*lo > 0 && std::isfinite(*hi), ErrorCode::kInvalidArgument,
                 "candidate scales must be positive and finite");
  ScaleWindow window;
  window.s_min = 0.2 * *lo;
  window.s_max = 5.0 * *hi;
  window.step = (window.s_max - window.s_min) / 10000.0;
  return window;
}

}  // namespace objscale
