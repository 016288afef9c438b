#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vvgen/llm_gateway.hpp"

namespace vvgen {

enum class ExtractionMode { Fenced, Heuristic };
std::string_view to_string(ExtractionMode mode) noexcept;

struct ExtractedTest {
  std::string prompt_id;
  std::string code;
  Language language = Language::C;
  ExtractionMode mode = ExtractionMode::Fenced;
};

struct ParsingFailure {
  std::string prompt_id;
  std::string reason;
};

using ExtractionOutcome = std::variant<ExtractedTest, ParsingFailure>;

inline bool extracted(const ExtractionOutcome& o) { return std::holds_alternative<ExtractedTest>(o); }
const std::string& outcome_prompt_id(const ExtractionOutcome& o);

/// Pulls a test out of raw model output.
///
/// 1. The first complete fenced block that carries a language marker
///    (`#include` / `int main` for C and C++; PROGRAM, FUNCTION or SUBROUTINE
///    for Fortran). The fence lines and info string are dropped.
/// 2. Otherwise, text from the first code-like line through the last
///    terminator: for C and C++ the `}` closing a top-level block that holds
///    a depth-1 `return` statement; for Fortran an `END`, `END PROGRAM`,
///    `END FUNCTION`, `END SUBROUTINE` or `END MODULE` line.
/// 3. Otherwise a parsing failure.
///
/// Extracted code has leading blank lines and trailing whitespace removed and
/// ends with a single newline.
ExtractionOutcome extract_code(std::string_view raw, Language language);

std::vector<ExtractionOutcome> extract_suite(const std::vector<GenerationRecord>& generations,
                                             const std::vector<PromptRecord>& prompts);

/// Writes `<prompt_id>.<ext>` per extracted test and `outcomes.jsonl` in input order.
void write_extracted(const std::vector<ExtractionOutcome>& outcomes, const std::filesystem::path& dir);
/// Reads back what write_extracted produced.
std::vector<ExtractionOutcome> read_extracted(const std::filesystem::path& dir);

}  // namespace vvgen
