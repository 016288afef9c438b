#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vvgen {

using Json = nlohmann::ordered_json;

/// Base languages a validation test can be written in.
enum class Language { C, Cpp, Fortran };

std::string_view to_string(Language lang) noexcept;
Language parse_language(std::string_view name);
std::optional<Language> language_from_extension(const std::filesystem::path& path);
/// Source extension used when writing extracted tests.
std::string_view source_extension(Language lang) noexcept;

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// JSON-lines helpers. Lines that are empty are skipped on read.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace vvgen
