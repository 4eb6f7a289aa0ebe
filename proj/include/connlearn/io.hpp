#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace connlearn {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; written atomically.
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);

}  // namespace connlearn
