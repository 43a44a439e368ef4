#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace objscale {

// Serializes with a fixed layout: two-space indentation, keys in insertion
// order, floating-point numbers with 17 significant digits and non-finite
// numbers as null.
std::string DumpJson(const nlohmann::ordered_json& value);

void WriteJsonFile(const std::filesystem::path& path, const nlohmann::ordered_json& value);

// Reads a JSON document; kIo when the file cannot be opened, kParse on
// malformed content.
nlohmann::ordered_json ReadJsonFile(const std::filesystem::path& path);

// "%.17g" formatting shared by the JSON and CSV writers.
std::string FormatDouble(double value);

}  // namespace objscale
