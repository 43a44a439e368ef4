#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace objscale {

// Vectors and matrices of at most three size dimensions, allocated inline.
using SizeVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using SizeMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

// Gaussian mixture over 1 to 3 size dimensions, in millimeters.
struct Gmm {
  int dims = 0;
  std::vector<double> weights;
  std::vector<SizeVector> means;
  std::vector<SizeMatrix> covs;

  int NumComponents() const { return static_cast<int>(weights.size()); }

  // Throws kInvalidArgument unless weights are positive and sum to one,
  // shapes agree and every covariance is symmetric with eigenvalues no
  // smaller than cov_floor (up to a relative 1e-9 slack).
  void Validate(double cov_floor) const;
};

// Mixture with per-component Cholesky factors cached for repeated
// evaluation.
class PreparedGmm {
 public:
  explicit PreparedGmm(const Gmm& gmm);

  int dims() const { return dims_; }
  double LogDensity(const SizeVector& x) const;
  double Density(const SizeVector& x) const;

 private:
  struct Component {
    double log_norm = 0;  // log w - d/2 log(2 pi) - 1/2 log|S|
    SizeVector mean;
    SizeMatrix chol_lower;
  };
  int dims_ = 0;
  std::vector<Component> components_;
};

double Density(const Gmm& gmm, const SizeVector& x);
double LogDensity(const Gmm& gmm, const SizeVector& x);

// Exact marginal over the kept coordinates. `keep` is sorted and
// de-duplicated before use; the returned mixture orders dimensions by
// ascending index.
Gmm Marginalize(const Gmm& gmm, std::span<const int> keep);

struct GmmFitOptions {
  int max_components = 3;
  int max_iterations = 500;
  // Relative log-likelihood change that ends EM.
  double tolerance = 1e-10;
  // Lower bound on covariance eigenvalues, mm^2.
  double cov_floor = 1.0;
  size_t min_samples = 10;
  uint64_t seed = 0;
};

struct GmmFitResult {
  Gmm gmm;
  // Log-likelihood of the selected model after each EM iteration.
  std::vector<double> log_likelihood_trace;
  // BIC per component count; infinity where the count was not fit.
  std::vector<double> bic;
  std::vector<std::string> warnings;
};

// EM with k-means++ seeding; the component count minimizing BIC over
// 1..max_components is kept.
GmmFitResult FitGmm(std::span<const SizeVector> samples,
                    const GmmFitOptions& options = {});

}  // namespace objscale
