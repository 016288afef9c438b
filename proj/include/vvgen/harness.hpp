#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vvgen/extractor.hpp"

namespace vvgen {

struct CompilerProfile {
  Language language = Language::C;
  /// e.g. "nvc -acc {src} -o {out}"; both placeholders are required.
  std::string compile_command;
  std::map<std::string, std::string> env;
  /// File name -> contents, written next to every test.
  std::map<std::string, std::string> support_headers;
};

/// A named set of per-language profiles ("host", "nvhpc").
struct ProfileSet {
  std::string name;
  std::map<Language, CompilerProfile> by_language;
};

/// Throws InvalidConfig on a command template without {src}/{out} or a
/// missing support header.
void validate_profile(const CompilerProfile& profile);

/// Parses the `profiles` object of a config. Header values are either inline
/// text or {"path": "..."} resolved against `base_dir`.
std::map<std::string, ProfileSet> profiles_from_json(const Json& j, const std::filesystem::path& base_dir);

/// Name of the header each language's tests include.
std::string_view support_header_name(Language lang) noexcept;

struct CompileResult {
  bool ok = false;
  std::filesystem::path binary;
  std::string diagnostics;
  std::optional<int> compiler_exit;
  std::chrono::milliseconds elapsed{0};
};

/// Writes the source and support headers into `dir` and runs the compiler.
/// Throws CompilerNotFound when the compiler executable cannot be resolved.
CompileResult compile(const ExtractedTest& test, const CompilerProfile& profile,
                      const std::filesystem::path& dir,
                      std::chrono::seconds timeout = std::chrono::seconds(300));

struct RunPolicy {
  int timeout_s = 60;
  int compile_timeout_s = 300;
  /// Parent of the fresh per-test directories; empty means the system temp dir.
  std::filesystem::path scratch_root;
  bool keep_dirs = false;
};

struct RunResult {
  std::optional<int> exit_code;
  std::optional<int> term_signal;
  bool timed_out = false;
  std::string out;
  std::string err;
  std::chrono::milliseconds elapsed{0};
};

/// Runs the binary in its own directory. Throws SpawnFailure.
RunResult execute(const std::filesystem::path& binary, const RunPolicy& policy);

enum class EvalOutcome { ParsingError, CompileError, RuntimeFail, Pass };
inline constexpr std::array kAllOutcomes = {EvalOutcome::ParsingError, EvalOutcome::CompileError,
                                            EvalOutcome::RuntimeFail, EvalOutcome::Pass};
std::string_view to_string(EvalOutcome outcome) noexcept;
EvalOutcome parse_outcome(std::string_view name);

/// Precedence: parsing error, then compile error, then runtime fail, then pass.
/// Throws InconsistentInputs when the optional stages do not line up.
EvalOutcome classify(const ExtractionOutcome& extraction, const std::optional<CompileResult>& compiled,
                     const std::optional<RunResult>& run);

struct EvalRecord {
  std::string prompt_id;
  /// Absent when an infrastructure fault prevented evaluation.
  std::optional<EvalOutcome> outcome;
  std::optional<int> exit_code;
  std::string compile_stderr;
  std::string run_stdout;
  std::string run_stderr;
  long long compile_ms = 0;
  long long run_ms = 0;
  bool timed_out = false;
  std::string infra_error;
  std::string detail;
};

Json to_json(const EvalRecord& record);
EvalRecord eval_from_json(const Json& j);

/// Builds and runs each test in a fresh directory; output order matches input.
std::vector<EvalRecord> evaluate_suite(const std::vector<ExtractionOutcome>& tests, const ProfileSet& profiles,
                                       const RunPolicy& policy, int workers);

void write_results(const std::vector<EvalRecord>& records, const std::filesystem::path& jsonl_path);
/// prompt_id,outcome,exit_code
std::string results_csv(const std::vector<EvalRecord>& records);

}  // namespace vvgen
