#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>

namespace hoopt {

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Parse errors are rethrown as InputError carrying path and line.
nlohmann::json parse_json_file(const std::filesystem::path& path);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace hoopt
