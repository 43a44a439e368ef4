#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "objscale/gmm.h"
#include "objscale/types.h"

namespace objscale {

enum class ShapeKind { kBox, kCylinder };

// One category of the size repository. Leaves hold size samples; an inner
// node's sample set is the union of its descendants' samples.
struct CategoryNode {
  std::string name;
  std::vector<CategoryNode> children;
  // (w, l, h) in millimeters; NaN marks a dimension outside dim_mask.
  std::vector<Eigen::Vector3d> samples;
  DimMask dim_mask = DimMask::All();
  // Mixture over the dim_mask dimensions in (w, l, h) order.
  std::optional<Gmm> prior;
  std::vector<std::string> image_urls;
  // Used by the scene simulator only.
  ShapeKind shape = ShapeKind::kBox;
  std::optional<Eigen::Vector3d> aspect;

  bool IsLeaf() const { return children.empty(); }
  std::vector<Eigen::Vector3d> EffectiveSamples() const;
  size_t EffectiveSampleCount() const;
};

struct RepositoryOptions {
  size_t min_samples = 10;
  int max_components = 3;
  double cov_floor = 1.0;
  uint64_t seed = 0;
  // Fit leaves that carry samples but no serialized mixture.
  bool fit_missing_priors = true;
};

constexpr int kMaxTreeDepth = 5;

CategoryNode ParseRepository(const nlohmann::json& document,
                             const RepositoryOptions& options = {});
CategoryNode LoadRepository(const std::filesystem::path& path,
                            const RepositoryOptions& options = {});
nlohmann::ordered_json RepositoryToJson(const CategoryNode& root);

// Descends from the root by child names. The root's own name is not part of
// the path.
const CategoryNode& Lookup(const CategoryNode& root,
                           std::span<const std::string> path);

// Effective samples restricted to `mask` dims, in (w, l, h) order. Samples
// with a missing value on any of those dims are skipped.
std::vector<SizeVector> MaskedSamples(const CategoryNode& node, DimMask mask);

// Fits a mixture to the node's effective samples over its dim_mask. Works for
// inner nodes (aggregated prior) as well as leaves.
GmmFitResult FitNodePrior(const CategoryNode& node, const CategoryPath& path,
                          const RepositoryOptions& options = {});

// Fits every leaf lacking a prior that has enough samples.
void FitMissingPriors(CategoryNode& root, const RepositoryOptions& options = {});

struct CategoryRef {
  CategoryPath path;
  const CategoryNode* node = nullptr;
};

// Leaves carrying a prior, in depth-first order.
std::vector<CategoryRef> UsableLeaves(const CategoryNode& root);

int TreeDepth(const CategoryNode& root);

}  // namespace objscale
