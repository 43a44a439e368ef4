#include "objscale/gmm.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "objscale/error.h"

namespace objscale {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double LogSumExp(std::span<const double> values) {
  double max_value = -std::numeric_limits<double>::infinity();
  for (const double v : values) max_value = std::max(max_value, v);
  if (!std::isfinite(max_value)) return max_value;
  double sum = 0;
  for (const double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

// Projects a symmetric matrix onto {eigenvalues >= floor}.
SizeMatrix FloorEigenvalues(const SizeMatrix& cov, double floor) {
  const SizeMatrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<SizeMatrix> solver(sym);
  SizeVector values = solver.eigenvalues();
  bool clamped = false;
  for (int i = 0; i < values.size(); ++i) {
    if (values(i) < floor) {
      values(i) = floor;
      clamped = true;
    }
  }
  if (!clamped) return sym;
  const SizeMatrix& vectors = solver.eigenvectors();
  SizeMatrix out = vectors * values.asDiagonal() * vectors.transpose();
  return 0.5 * (out + out.transpose());
}

int NumParameters(int k, int d) { return (k - 1) + k * d + k * d * (d + 1) / 2; }

size_t CountDistinct(std::span<const SizeVector> samples) {
  std::vector<const SizeVector*> sorted;
  sorted.reserve(samples.size());
  for (const auto& s : samples) sorted.push_back(&s);
  auto less = [](const SizeVector* a, const SizeVector* b) {
    return std::lexicographical_compare(a->data(), a->data() + a->size(),
                                        b->data(), b->data() + b->size());
  };
  std::sort(sorted.begin(), sorted.end(), less);
  size_t distinct = 0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || *sorted[i] != *sorted[i - 1]) ++distinct;
  }
  return distinct;
}

std::vector<SizeVector> KMeansPlusPlusCenters(std::span<const SizeVector> samples,
                                              int k, std::mt19937_64& rng) {
  std::vector<SizeVector> centers;
  std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);
  centers.push_back(samples[pick(rng)]);
  std::vector<double> d2(samples.size(), std::numeric_limits<double>::max());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
      d2[i] = std::min(d2[i], (samples[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    if (total <= 0) break;
    std::uniform_real_distribution<double> u(0, total);
    const double target = u(rng);
    double acc = 0;
    size_t chosen = samples.size() - 1;
    for (size_t i = 0; i < samples.size(); ++i) {
      acc += d2[i];
      if (acc >= target && d2[i] > 0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(samples[chosen]);
  }
  return centers;
}

struct EmRun {
  Gmm gmm;
  std::vector<double> trace;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  bool ok = false;
};

EmRun RunEm(std::span<const SizeVector> samples, int k,
            const GmmFitOptions& options, uint64_t seed) {
  const int d = static_cast<int>(samples.front().size());
  const size_t n = samples.size();
  std::mt19937_64 rng(seed);

  SizeVector global_mean = SizeVector::Zero(d);
  for (const auto& s : samples) global_mean += s;
  global_mean /= static_cast<double>(n);
  SizeMatrix global_cov = SizeMatrix::Zero(d, d);
  for (const auto& s : samples) {
    const SizeVector c = s - global_mean;
    global_cov += c * c.transpose();
  }
  global_cov /= static_cast<double>(n);

  EmRun run;
  Gmm& gmm = run.gmm;
  gmm.dims = d;
  const std::vector<SizeVector> centers = KMeansPlusPlusCenters(samples, k, rng);
  if (static_cast<int>(centers.size()) < k) return run;
  for (int j = 0; j < k; ++j) {
    gmm.weights.push_back(1.0 / k);
    gmm.means.push_back(centers[j]);
    gmm.covs.push_back(FloorEigenvalues(global_cov, options.cov_floor));
  }

  Eigen::MatrixXd log_resp(n, k);
  std::vector<double> row(k);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iteration = 0; iteration < options.max_iterations; ++iteration) {
    // E-step.
    std::vector<PreparedGmm> singles;
    singles.reserve(k);
    for (int j = 0; j < k; ++j) {
      Gmm single;
      single.dims = d;
      single.weights = {1.0};
      single.means = {gmm.means[j]};
      single.covs = {gmm.covs[j]};
      singles.emplace_back(single);
    }
    double log_likelihood = 0;
    for (size_t i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        row[j] = std::log(gmm.weights[j]) + singles[j].LogDensity(samples[i]);
      }
      const double norm = LogSumExp(row);
      log_likelihood += norm;
      for (int j = 0; j < k; ++j) log_resp(i, j) = row[j] - norm;
    }
    run.trace.push_back(log_likelihood);
    run.log_likelihood = log_likelihood;
    if (iteration > 0 &&
        log_likelihood - previous <= options.tolerance * std::abs(log_likelihood)) {
      break;
    }
    previous = log_likelihood;

    // M-step.
    for (int j = 0; j < k; ++j) {
      double nk = 0;
      SizeVector mean = SizeVector::Zero(d);
      for (size_t i = 0; i < n; ++i) {
        const double r = std::exp(log_resp(i, j));
        nk += r;
        mean += r * samples[i];
      }
      if (nk <= 1e-10 * static_cast<double>(n)) return run;
      mean /= nk;
      SizeMatrix cov = SizeMatrix::Zero(d, d);
      for (size_t i = 0; i < n; ++i) {
        const double r = std::exp(log_resp(i, j));
        const SizeVector c = samples[i] - mean;
        cov += r * (c * c.transpose());
      }
      cov /= nk;
      gmm.weights[j] = nk / static_cast<double>(n);
      gmm.means[j] = mean;
      gmm.covs[j] = FloorEigenvalues(cov, options.cov_floor);
    }
    double weight_sum = 0;
    for (const double w : gmm.weights) weight_sum += w;
    for (double& w : gmm.weights) w /= weight_sum;
  }
  run.ok = true;
  return run;
}

}  // namespace

void Gmm::Validate(double cov_floor) const {
  OBJSCALE_CHECK(dims >= 1 && dims <= 3, ErrorCode::kInvalidArgument,
                 "gmm dims must be 1, 2 or 3");
  OBJSCALE_CHECK(!weights.empty(), ErrorCode::kInvalidArgument,
                 "gmm has no components");
  OBJSCALE_CHECK(means.size() == weights.size() && covs.size() == weights.size(),
                 ErrorCode::kInvalidArgument,
                 "gmm weights, means and covariances differ in length");
  double sum = 0;
  for (const double w : weights) {
    OBJSCALE_CHECK(std::isfinite(w) && w > 0, ErrorCode::kInvalidArgument,
                   "gmm weights must be positive");
    sum += w;
  }
  OBJSCALE_CHECK(std::abs(sum - 1.0) <= 1e-9, ErrorCode::kInvalidArgument,
                 "gmm weights must sum to 1");
  for (size_t j = 0; j < weights.size(); ++j) {
    OBJSCALE_CHECK(means[j].size() == dims && covs[j].rows() == dims &&
                       covs[j].cols() == dims,
                   ErrorCode::kInvalidArgument, "gmm component has wrong shape");
    OBJSCALE_CHECK(means[j].allFinite() && covs[j].allFinite(),
                   ErrorCode::kInvalidArgument, "gmm parameters must be finite");
    const double scale = std::max(1.0, covs[j].cwiseAbs().maxCoeff());
    OBJSCALE_CHECK((covs[j] - covs[j].transpose()).cwiseAbs().maxCoeff() <=
                       1e-9 * scale,
                   ErrorCode::kInvalidArgument, "gmm covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<SizeMatrix> solver(covs[j]);
    OBJSCALE_CHECK(solver.eigenvalues().minCoeff() >= cov_floor * (1 - 1e-9),
                   ErrorCode::kInvalidArgument,
                   "gmm covariance eigenvalue below the floor");
  }
}

PreparedGmm::PreparedGmm(const Gmm& gmm) : dims_(gmm.dims) {
  components_.reserve(gmm.weights.size());
  for (size_t j = 0; j < gmm.weights.size(); ++j) {
    Eigen::LLT<SizeMatrix> llt(gmm.covs[j]);
    OBJSCALE_CHECK(llt.info() == Eigen::Success, ErrorCode::kInvalidArgument,
                   "gmm covariance is not positive definite");
    Component c;
    c.mean = gmm.means[j];
    c.chol_lower = llt.matrixL();
    double half_log_det = 0;
    for (int i = 0; i < dims_; ++i) half_log_det += std::log(c.chol_lower(i, i));
    c.log_norm = std::log(gmm.weights[j]) - 0.5 * dims_ * kLog2Pi - half_log_det;
    components_.push_back(std::move(c));
  }
}

double PreparedGmm::LogDensity(const SizeVector& x) const {
  OBJSCALE_CHECK(x.size() == dims_, ErrorCode::kInvalidArgument,
                 "density query has wrong dimension");
  std::array<double, 8> stack_terms{};
  std::vector<double> heap_terms;
  std::span<double> terms;
  if (components_.size() <= stack_terms.size()) {
    terms = std::span<double>(stack_terms.data(), components_.size());
  } else {
    heap_terms.resize(components_.size());
    terms = heap_terms;
  }
  for (size_t j = 0; j < components_.size(); ++j) {
    const Component& c = components_[j];
    const SizeVector z =
        c.chol_lower.triangularView<Eigen::Lower>().solve(x - c.mean);
    terms[j] = c.log_norm - 0.5 * z.squaredNorm();
  }
  return LogSumExp(terms);
}

double PreparedGmm::Density(const SizeVector& x) const {
  return std::exp(LogDensity(x));
}

double Density(const Gmm& gmm, const SizeVector& x) {
  return PreparedGmm(gmm).Density(x);
}

double LogDensity(const Gmm& gmm, const SizeVector& x) {
  return PreparedGmm(gmm).LogDensity(x);
}

Gmm Marginalize(const Gmm& gmm, std::span<const int> keep) {
  std::vector<int> indices(keep.begin(), keep.end());
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  OBJSCALE_CHECK(!indices.empty(), ErrorCode::kInvalidArgument,
                 "marginalize needs at least one kept dimension");
  OBJSCALE_CHECK(indices.front() >= 0 && indices.back() < gmm.dims,
                 ErrorCode::kInvalidArgument,
                 "marginalize index out of range");
  const int m = static_cast<int>(indices.size());
  Gmm out;
  out.dims = m;
  out.weights = gmm.weights;
  for (size_t j = 0; j < gmm.weights.size(); ++j) {
    SizeVector mean(m);
    SizeMatrix cov(m, m);
    for (int a = 0; a < m; ++a) {
      mean(a) = gmm.means[j](indices[a]);
      for (int b = 0; b < m; ++b) cov(a, b) = gmm.covs[j](indices[a], indices[b]);
    }
    out.means.push_back(mean);
    out.covs.push_back(cov);
  }
  return out;
}

GmmFitResult FitGmm(std::span<const SizeVector> samples,
                    const GmmFitOptions& options) {
  OBJSCALE_CHECK(samples.size() >= options.min_samples,
                 ErrorCode::kInvalidArgument,
                 "fit_gmm needs at least " + std::to_string(options.min_samples) +
                     " samples, got " + std::to_string(samples.size()));
  OBJSCALE_CHECK(!samples.empty(), ErrorCode::kInvalidArgument,
                 "fit_gmm needs samples");
  const int d = static_cast<int>(samples.front().size());
  OBJSCALE_CHECK(d >= 1 && d <= 3, ErrorCode::kInvalidArgument,
                 "fit_gmm supports 1 to 3 dimensions");
  for (const auto& s : samples) {
    OBJSCALE_CHECK(s.size() == d, ErrorCode::kInvalidArgument,
                   "fit_gmm samples differ in dimension");
    OBJSCALE_CHECK(s.allFinite(), ErrorCode::kInvalidArgument,
                   "fit_gmm samples must be finite");
  }
  OBJSCALE_CHECK(options.max_components >= 1, ErrorCode::kInvalidArgument,
                 "max_components must be at least 1");

  GmmFitResult result;
  const size_t distinct = CountDistinct(samples);
  if (distinct == 1) {
    result.warnings.push_back(
        "all samples identical; covariance set to the floor");
  }
  const double log_n = std::log(static_cast<double>(samples.size()));
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= options.max_components; ++k) {
    result.bic.push_back(std::numeric_limits<double>::infinity());
    if (static_cast<size_t>(k) > distinct) continue;
    EmRun run = RunEm(samples, k, options, options.seed + 0x9E3779B97F4A7C15ull * k);
    if (!run.ok) continue;
    const double bic = -2.0 * run.log_likelihood + NumParameters(k, d) * log_n;
    result.bic.back() = bic;
    if (bic < best_bic) {
      best_bic = bic;
      result.gmm = std::move(run.gmm);
      result.log_likelihood_trace = std::move(run.trace);
    }
  }
  OBJSCALE_CHECK(result.gmm.NumComponents() > 0, ErrorCode::kDegenerate,
                 "fit_gmm failed for every component count");
  return result;
}

}  // namespace objscale
