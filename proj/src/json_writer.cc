#include "objscale/json_writer.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "objscale/error.h"

namespace objscale {
namespace {

void Indent(std::string& out, int depth) { out.append(static_cast<size_t>(depth) * 2, ' '); }

void Write(const nlohmann::ordered_json& value, int depth, std::string& out) {
  using Type = nlohmann::ordered_json::value_t;
  switch (value.type()) {
    case Type::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        Indent(out, depth + 1);
        out += nlohmann::ordered_json(it.key()).dump();
        out += ": ";
        Write(it.value(), depth + 1, out);
      }
      out += "\n";
      Indent(out, depth);
      out += "}";
      return;
    }
    case Type::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool scalars = true;
      for (const auto& v : value) scalars = scalars && !v.is_structured();
      if (scalars) {
        out += "[";
        for (size_t i = 0; i < value.size(); ++i) {
          if (i > 0) out += ", ";
          Write(value[i], depth + 1, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (size_t i = 0; i < value.size(); ++i) {
        if (i > 0) out += ",\n";
        Indent(out, depth + 1);
        Write(value[i], depth + 1, out);
      }
      out += "\n";
      Indent(out, depth);
      out += "]";
      return;
    }
    case Type::number_float:
      out += FormatDouble(value.get<double>());
      return;
    default:
      out += value.dump();
      return;
  }
}

}  // namespace

std::string FormatDouble(double value) {
  if (!std::isfinite(value)) return "null";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string DumpJson(const nlohmann::ordered_json& value) {
  std::string out;
  Write(value, 0, out);
  out += "\n";
  return out;
}

void WriteJsonFile(const std::filesystem::path& path, const nlohmann::ordered_json& value) {
  std::ofstream file(path, std::ios::binary);
  OBJSCALE_CHECK(file.good(), ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  file << DumpJson(value);
  OBJSCALE_CHECK(file.good(), ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

nlohmann::ordered_json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  OBJSCALE_CHECK(file.good(), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << file.rdbuf();
  try {
    return nlohmann::ordered_json::parse(buffer.str());
  } catch (const nlohmann::json::parse_error& e) {
    Throw(ErrorCode::kParse, "'" + path.string() + "': " + e.what());
  }
}

}  // namespace objscale
