#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace objscale {

using Point3 = Eigen::Vector3d;
using PointCloud = std::vector<Eigen::Vector3d>;

// Category path below the repository root, e.g. {"furniture", "chair"}.
using CategoryPath = std::vector<std::string>;

std::string JoinCategory(const CategoryPath& path);
CategoryPath SplitCategory(std::string_view joined);

// Size dimensions in the (w, l, h) order used by priors and size samples.
enum class Dim : int { kWidth = 0, kLength = 1, kHeight = 2 };

constexpr std::array<Dim, 3> kAllDims = {Dim::kWidth, Dim::kLength,
                                         Dim::kHeight};

char DimLetter(Dim dim);
Dim DimFromLetter(std::string_view letter);

// Subset of {W, L, H}.
class DimMask {
 public:
  DimMask() = default;
  static DimMask All() { return DimMask(0b111); }
  static DimMask FromDims(const std::vector<Dim>& dims);

  bool Has(Dim dim) const { return (bits_ >> static_cast<int>(dim)) & 1u; }
  void Set(Dim dim) { bits_ |= 1u << static_cast<int>(dim); }
  bool Empty() const { return bits_ == 0; }
  int Count() const;
  // Dims in (w, l, h) order.
  std::vector<Dim> Dims() const;
  DimMask Intersect(DimMask other) const {
    return DimMask(bits_ & other.bits_);
  }
  bool operator==(const DimMask&) const = default;

 private:
  explicit DimMask(uint8_t bits) : bits_(bits) {}
  uint8_t bits_ = 0;
};

}  // namespace objscale
