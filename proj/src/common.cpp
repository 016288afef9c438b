#include "vvgen/common.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "vvgen/error.hpp"

namespace vvgen {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::NoHeadingsFound: return "NoHeadingsFound";
    case ErrorCode::OffsetOutOfRange: return "OffsetOutOfRange";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::ProviderUnreachable: return "ProviderUnreachable";
    case ErrorCode::DimsMismatch: return "DimsMismatch";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::EmptyContext: return "EmptyContext";
    case ErrorCode::MissingAsset: return "MissingAsset";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::Exhausted: return "Exhausted";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::DanglingPromptId: return "DanglingPromptId";
    case ErrorCode::CompilerNotFound: return "CompilerNotFound";
    case ErrorCode::SpawnFailure: return "SpawnFailure";
    case ErrorCode::InconsistentInputs: return "InconsistentInputs";
    case ErrorCode::NoMatch: return "NoMatch";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MissingMetadata: return "MissingMetadata";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

std::string_view to_string(Language lang) noexcept {
  switch (lang) {
    case Language::C: return "C";
    case Language::Cpp: return "C++";
    case Language::Fortran: return "Fortran";
  }
  return "?";
}

Language parse_language(std::string_view name) {
  const auto lower = to_lower(name);
  if (lower == "c") return Language::C;
  if (lower == "c++" || lower == "cpp" || lower == "cxx") return Language::Cpp;
  if (lower == "fortran" || lower == "f90") return Language::Fortran;
  throw Error(ErrorCode::InvalidParams, "unknown language '" + std::string(name) + "'");
}

std::optional<Language> language_from_extension(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".c") return Language::C;
  if (ext == ".cpp" || ext == ".cc" || ext == ".cxx" || ext == ".C") return Language::Cpp;
  const auto lower = to_lower(ext);
  if (lower == ".f90" || lower == ".f" || lower == ".f95" || lower == ".f03") {
    return Language::Fortran;
  }
  return std::nullopt;
}

std::string_view source_extension(Language lang) noexcept {
  switch (lang) {
    case Language::C: return ".c";
    case Language::Cpp: return ".cpp";
    case Language::Fortran: return ".F90";
  }
  return "";
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoFailure, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::UnreadableFile, path.string());
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableFile, path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::UnreadableFile,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace vvgen
