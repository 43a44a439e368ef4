#include "objscale/metric_tree.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "objscale/error.h"

namespace objscale {
namespace {

using nlohmann::json;

uint64_t HashPath(const CategoryPath& path) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& name : path) {
    for (const unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= '/';
    h *= 1099511628211ull;
  }
  return h;
}

std::string Where(const CategoryPath& path) {
  return path.empty() ? std::string("<root>") : JoinCategory(path);
}

Gmm ParseGmm(const json& j, int dims, const CategoryPath& path) {
  const std::string where = Where(path);
  OBJSCALE_CHECK(j.is_object() && j.contains("weights") && j.contains("means") &&
                     j.contains("covs"),
                 ErrorCode::kParse, "gmm of '" + where + "' needs weights, means, covs");
  Gmm gmm;
  gmm.dims = dims;
  gmm.weights = j.at("weights").get<std::vector<double>>();
  const auto means = j.at("means").get<std::vector<std::vector<double>>>();
  const auto covs = j.at("covs").get<std::vector<std::vector<std::vector<double>>>>();
  OBJSCALE_CHECK(means.size() == gmm.weights.size() && covs.size() == gmm.weights.size(),
                 ErrorCode::kInvalidArgument,
                 "gmm of '" + where + "' has inconsistent component counts");
  for (size_t k = 0; k < means.size(); ++k) {
    OBJSCALE_CHECK(static_cast<int>(means[k].size()) == dims &&
                       static_cast<int>(covs[k].size()) == dims,
                   ErrorCode::kInvalidArgument,
                   "gmm of '" + where + "' does not match dim_mask size");
    SizeVector mean(dims);
    SizeMatrix cov(dims, dims);
    for (int a = 0; a < dims; ++a) {
      mean(a) = means[k][a];
      OBJSCALE_CHECK(static_cast<int>(covs[k][a].size()) == dims,
                     ErrorCode::kInvalidArgument,
                     "gmm of '" + where + "' has a ragged covariance");
      for (int b = 0; b < dims; ++b) cov(a, b) = covs[k][a][b];
    }
    gmm.means.push_back(mean);
    gmm.covs.push_back(cov);
  }
  double sum = 0;
  for (const double w : gmm.weights) sum += w;
  if (std::abs(sum - 1.0) <= 1e-6 && sum > 0) {
    for (double& w : gmm.weights) w /= sum;
  }
  return gmm;
}

double ParseCoordinate(const json& v, const CategoryPath& path) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  OBJSCALE_CHECK(v.is_number(), ErrorCode::kParse,
                 "sample entry of '" + Where(path) + "' is not a number");
  return v.get<double>();
}

CategoryNode ParseNode(const json& j, CategoryPath& path, int depth,
                       const RepositoryOptions& options) {
  OBJSCALE_CHECK(j.is_object(), ErrorCode::kParse, "tree node must be an object");
  OBJSCALE_CHECK(depth <= kMaxTreeDepth, ErrorCode::kInvalidArgument,
                 "tree deeper than " + std::to_string(kMaxTreeDepth) + " levels at '" +
                     Where(path) + "'");
  CategoryNode node;
  OBJSCALE_CHECK(j.contains("name") && j.at("name").is_string(), ErrorCode::kParse,
                 "tree node without a name under '" + Where(path) + "'");
  node.name = j.at("name").get<std::string>();
  OBJSCALE_CHECK(!node.name.empty() && node.name.find('/') == std::string::npos,
                 ErrorCode::kInvalidArgument,
                 "invalid category name '" + node.name + "'");
  if (depth > 1) path.push_back(node.name);
  const std::string where = Where(path);

  if (j.contains("samples")) {
    for (const auto& s : j.at("samples")) {
      OBJSCALE_CHECK(s.is_array() && s.size() == 3, ErrorCode::kParse,
                     "sample of '" + where + "' must have three entries");
      node.samples.emplace_back(ParseCoordinate(s[0], path), ParseCoordinate(s[1], path),
                                ParseCoordinate(s[2], path));
    }
  }
  if (j.contains("dim_mask")) {
    node.dim_mask = DimMask();
    for (const auto& tag : j.at("dim_mask")) {
      node.dim_mask.Set(DimFromLetter(tag.get<std::string>()));
    }
  } else {
    // Every dimension present in all samples.
    node.dim_mask = DimMask();
    for (const Dim d : kAllDims) {
      bool present = true;
      for (const auto& s : node.samples) present &= !std::isnan(s(static_cast<int>(d)));
      if (present) node.dim_mask.Set(d);
    }
  }
  OBJSCALE_CHECK(!node.dim_mask.Empty(), ErrorCode::kInvalidArgument,
                 "empty dim_mask at '" + where + "'");
  for (const auto& s : node.samples) {
    for (const Dim d : kAllDims) {
      const double v = s(static_cast<int>(d));
      if (node.dim_mask.Has(d)) {
        OBJSCALE_CHECK(std::isfinite(v) && v > 0, ErrorCode::kInvalidArgument,
                       "sample of '" + where + "' lacks a positive value for '" +
                           std::string(1, DimLetter(d)) + "'");
      } else {
        OBJSCALE_CHECK(std::isnan(v) || (std::isfinite(v) && v > 0),
                       ErrorCode::kInvalidArgument,
                       "sample of '" + where + "' has an invalid value");
      }
    }
  }
  if (j.contains("images")) {
    node.image_urls = j.at("images").get<std::vector<std::string>>();
  }
  if (j.contains("shape")) {
    const auto shape = j.at("shape").get<std::string>();
    if (shape == "box") {
      node.shape = ShapeKind::kBox;
    } else if (shape == "cylinder") {
      node.shape = ShapeKind::kCylinder;
    } else {
      Throw(ErrorCode::kParse, "unknown shape '" + shape + "' at '" + where + "'");
    }
  }
  if (j.contains("aspect")) {
    const auto a = j.at("aspect").get<std::vector<double>>();
    OBJSCALE_CHECK(a.size() == 3 && a[0] > 0 && a[1] > 0 && a[2] > 0,
                   ErrorCode::kInvalidArgument, "aspect of '" + where + "' must be 3 positive values");
    node.aspect = Eigen::Vector3d(a[0], a[1], a[2]);
  }

  std::set<std::string> names;
  if (j.contains("children")) {
    for (const auto& child_json : j.at("children")) {
      CategoryNode child = ParseNode(child_json, path, depth + 1, options);
      OBJSCALE_CHECK(names.insert(child.name).second, ErrorCode::kInvalidArgument,
                     "duplicate sibling name '" + child.name + "' under '" + where + "'");
      node.children.push_back(std::move(child));
    }
  }
  OBJSCALE_CHECK(node.IsLeaf() || node.samples.empty(), ErrorCode::kInvalidArgument,
                 "inner node '" + where + "' must not carry its own samples");

  if (j.contains("gmm") && !j.at("gmm").is_null()) {
    Gmm gmm = ParseGmm(j.at("gmm"), node.dim_mask.Count(), path);
    gmm.Validate(options.cov_floor);
    node.prior = std::move(gmm);
  }
  if (node.IsLeaf() && node.prior) {
    OBJSCALE_CHECK(node.samples.size() >= options.min_samples,
                   ErrorCode::kInvalidArgument,
                   "leaf '" + where + "' has a prior but only " +
                       std::to_string(node.samples.size()) + " samples");
  }
  if (depth > 1) path.pop_back();
  return node;
}

nlohmann::ordered_json NodeToJson(const CategoryNode& node) {
  nlohmann::ordered_json j;
  j["name"] = node.name;
  std::vector<std::string> mask;
  for (const Dim d : node.dim_mask.Dims()) mask.emplace_back(1, DimLetter(d));
  j["dim_mask"] = mask;
  if (node.shape == ShapeKind::kCylinder) j["shape"] = "cylinder";
  if (node.aspect) j["aspect"] = {(*node.aspect)(0), (*node.aspect)(1), (*node.aspect)(2)};
  if (!node.image_urls.empty()) j["images"] = node.image_urls;
  if (!node.samples.empty()) {
    auto samples = nlohmann::ordered_json::array();
    for (const auto& s : node.samples) {
      auto row = nlohmann::ordered_json::array();
      for (int i = 0; i < 3; ++i) {
        if (std::isnan(s(i))) {
          row.push_back(nullptr);
        } else {
          row.push_back(s(i));
        }
      }
      samples.push_back(row);
    }
    j["samples"] = samples;
  }
  if (node.prior) {
    const Gmm& g = *node.prior;
    nlohmann::ordered_json gj;
    gj["weights"] = g.weights;
    auto means = nlohmann::ordered_json::array();
    auto covs = nlohmann::ordered_json::array();
    for (int k = 0; k < g.NumComponents(); ++k) {
      means.push_back(std::vector<double>(g.means[k].data(), g.means[k].data() + g.dims));
      auto cov = nlohmann::ordered_json::array();
      for (int a = 0; a < g.dims; ++a) {
        std::vector<double> r;
        for (int b = 0; b < g.dims; ++b) r.push_back(g.covs[k](a, b));
        cov.push_back(r);
      }
      covs.push_back(cov);
    }
    gj["means"] = means;
    gj["covs"] = covs;
    j["gmm"] = gj;
  }
  if (!node.children.empty()) {
    auto children = nlohmann::ordered_json::array();
    for (const auto& c : node.children) children.push_back(NodeToJson(c));
    j["children"] = children;
  }
  return j;
}

void FitMissing(CategoryNode& node, CategoryPath& path, bool is_root,
                const RepositoryOptions& options) {
  if (!is_root) path.push_back(node.name);
  if (node.IsLeaf() && !node.prior && node.samples.size() >= options.min_samples) {
    node.prior = FitNodePrior(node, path, options).gmm;
  }
  for (auto& child : node.children) FitMissing(child, path, false, options);
  if (!is_root) path.pop_back();
}

void CollectLeaves(const CategoryNode& node, CategoryPath& path, bool is_root,
                   std::vector<CategoryRef>& out) {
  if (!is_root) path.push_back(node.name);
  if (node.IsLeaf() && node.prior) out.push_back({path, &node});
  for (const auto& child : node.children) CollectLeaves(child, path, false, out);
  if (!is_root) path.pop_back();
}

}  // namespace

std::vector<Eigen::Vector3d> CategoryNode::EffectiveSamples() const {
  if (IsLeaf()) return samples;
  std::vector<Eigen::Vector3d> out;
  for (const auto& child : children) {
    auto sub = child.EffectiveSamples();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

size_t CategoryNode::EffectiveSampleCount() const {
  if (IsLeaf()) return samples.size();
  size_t n = 0;
  for (const auto& child : children) n += child.EffectiveSampleCount();
  return n;
}

CategoryNode ParseRepository(const nlohmann::json& document,
                             const RepositoryOptions& options) {
  OBJSCALE_CHECK(document.is_object(), ErrorCode::kParse, "priors file must be a JSON object");
  OBJSCALE_CHECK(document.contains("version") && document.at("version") == 1,
                 ErrorCode::kParse, "priors file must declare \"version\": 1");
  OBJSCALE_CHECK(document.contains("tree"), ErrorCode::kParse, "priors file has no \"tree\"");
  CategoryPath path;
  CategoryNode root = ParseNode(document.at("tree"), path, 1, options);
  if (options.fit_missing_priors) FitMissingPriors(root, options);
  return root;
}

CategoryNode LoadRepository(const std::filesystem::path& path,
                            const RepositoryOptions& options) {
  std::ifstream in(path);
  OBJSCALE_CHECK(in.good(), ErrorCode::kIo, "cannot open priors file " + path.string());
  nlohmann::json document;
  try {
    in >> document;
  } catch (const nlohmann::json::exception& e) {
    Throw(ErrorCode::kParse, "priors file " + path.string() + ": " + e.what());
  }
  try {
    return ParseRepository(document, options);
  } catch (const nlohmann::json::exception& e) {
    Throw(ErrorCode::kParse, "priors file " + path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json RepositoryToJson(const CategoryNode& root) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["tree"] = NodeToJson(root);
  return j;
}

const CategoryNode& Lookup(const CategoryNode& root, std::span<const std::string> path) {
  OBJSCALE_CHECK(!path.empty(), ErrorCode::kInvalidArgument, "lookup path is empty");
  const CategoryNode* node = &root;
  for (const auto& name : path) {
    const CategoryNode* next = nullptr;
    for (const auto& child : node->children) {
      if (child.name == name) {
        next = &child;
        break;
      }
    }
    OBJSCALE_CHECK(next != nullptr, ErrorCode::kInvalidArgument,
                   "unknown category '" + name + "' in path '" +
                       JoinCategory(CategoryPath(path.begin(), path.end())) + "'");
    node = next;
  }
  return *node;
}

std::vector<SizeVector> MaskedSamples(const CategoryNode& node, DimMask mask) {
  const std::vector<Dim> dims = mask.Dims();
  std::vector<SizeVector> out;
  for (const auto& s : node.EffectiveSamples()) {
    SizeVector v(static_cast<int>(dims.size()));
    bool complete = true;
    for (size_t i = 0; i < dims.size(); ++i) {
      v(static_cast<int>(i)) = s(static_cast<int>(dims[i]));
      complete &= !std::isnan(v(static_cast<int>(i)));
    }
    if (complete) out.push_back(v);
  }
  return out;
}

GmmFitResult FitNodePrior(const CategoryNode& node, const CategoryPath& path,
                          const RepositoryOptions& options) {
  const std::vector<SizeVector> samples = MaskedSamples(node, node.dim_mask);
  GmmFitOptions fit;
  fit.max_components = options.max_components;
  fit.cov_floor = options.cov_floor;
  fit.min_samples = options.min_samples;
  fit.seed = options.seed ^ HashPath(path);
  return FitGmm(samples, fit);
}

void FitMissingPriors(CategoryNode& root, const RepositoryOptions& options) {
  CategoryPath path;
  FitMissing(root, path, true, options);
}

std::vector<CategoryRef> UsableLeaves(const CategoryNode& root) {
  std::vector<CategoryRef> out;
  CategoryPath path;
  CollectLeaves(root, path, true, out);
  return out;
}

int TreeDepth(const CategoryNode& root) {
  int depth = 0;
  for (const auto& child : root.children) depth = std::max(depth, TreeDepth(child));
  return depth + 1;
}

}  // namespace objscale
