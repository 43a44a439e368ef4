#include "objscale/error.h"

#include <algorithm>
#include <bit>

#include "objscale/types.h"

namespace objscale {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid argument";
    case ErrorCode::kIo:
      return "i/o error";
    case ErrorCode::kParse:
      return "parse error";
    case ErrorCode::kDegenerate:
      return "degenerate input";
    case ErrorCode::kNoObjects:
      return "no objects";
  }
  return "unknown";
}

void Throw(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

std::string JoinCategory(const CategoryPath& path) {
  std::string out;
  for (size_t i = 0; i < path.size(); ++i) {
    if (i > 0) out += '/';
    out += path[i];
  }
  return out;
}

CategoryPath SplitCategory(std::string_view joined) {
  CategoryPath path;
  size_t start = 0;
  while (start <= joined.size()) {
    const size_t slash = joined.find('/', start);
    const size_t end = slash == std::string_view::npos ? joined.size() : slash;
    if (end > start) path.emplace_back(joined.substr(start, end - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return path;
}

char DimLetter(Dim dim) {
  switch (dim) {
    case Dim::kWidth:
      return 'w';
    case Dim::kLength:
      return 'l';
    case Dim::kHeight:
      return 'h';
  }
  return '?';
}

Dim DimFromLetter(std::string_view letter) {
  if (letter == "w" || letter == "W") return Dim::kWidth;
  if (letter == "l" || letter == "L") return Dim::kLength;
  if (letter == "h" || letter == "H") return Dim::kHeight;
  Throw(ErrorCode::kParse, "unknown dimension tag '" + std::string(letter) + "'");
}

DimMask DimMask::FromDims(const std::vector<Dim>& dims) {
  DimMask mask;
  for (const Dim d : dims) mask.Set(d);
  return mask;
}

int DimMask::Count() const { return std::popcount(bits_); }

std::vector<Dim> DimMask::Dims() const {
  std::vector<Dim> dims;
  for (const Dim d : kAllDims) {
    if (Has(d)) dims.push_back(d);
  }
  return dims;
}

}  // namespace objscale
