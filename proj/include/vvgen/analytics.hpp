#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vvgen/harness.hpp"
#include "vvgen/prompt_forge.hpp"

namespace vvgen {

struct PromptMeta {
  std::string llm;
  std::string method;
  Language language = Language::C;
};
using MetaMap = std::unordered_map<std::string, PromptMeta>;

MetaMap meta_from_prompts(const std::vector<PromptRecord>& prompts);
/// Accepts a prompts JSON-lines file or an object {prompt_id: {llm, method, language}}.
MetaMap load_meta(const std::filesystem::path& path);

/// Integer percentage, rounded half away from zero. 0 when `total` is 0.
int display_percent(std::size_t part, std::size_t total);

using OutcomeCounts = std::array<std::size_t, kAllOutcomes.size()>;

struct SuiteReport {
  std::string llm;
  std::string method;
  OutcomeCounts counts{};
  std::size_t total = 0;
  /// Records without an outcome (infrastructure faults); not part of `total`.
  std::size_t infra_errors = 0;

  std::size_t count(EvalOutcome o) const { return counts[static_cast<std::size_t>(o)]; }
  double pass_pct() const;
  int pass_display() const { return display_percent(count(EvalOutcome::Pass), total); }
};

/// One report per (llm, method), sorted by llm then method. Throws MissingMetadata.
std::vector<SuiteReport> tabulate(const std::vector<EvalRecord>& records, const MetaMap& meta);

struct LanguageStat {
  std::size_t pass = 0;
  std::size_t total = 0;
  double pct() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(pass) / static_cast<double>(total); }
  int display() const { return display_percent(pass, total); }
};

struct LanguageBreakdown {
  std::string llm;
  std::map<Language, LanguageStat> per_language;
};

/// Per-language pass counts for each llm, sorted by llm. Throws MissingMetadata.
std::vector<LanguageBreakdown> language_breakdown(const std::vector<EvalRecord>& records, const MetaMap& meta);

struct AnnotationRecord {
  std::string prompt_id;
  bool is_passing_test = false;
  std::optional<bool> true_pass;
  double correctness = 0.0;
  bool base_language_error = false;
  bool openacc_error = false;
};

inline constexpr std::array kCorrectnessLevels = {0.0, 0.25, 0.5, 0.75, 1.0};

/// Throws InvariantViolation naming the record.
void validate_annotation(const AnnotationRecord& record);

Json to_json(const AnnotationRecord& record);
AnnotationRecord annotation_from_json(const Json& j);

/// Append-only ledger; later entries for a prompt supersede earlier ones.
void append_annotation(const std::filesystem::path& ledger, const AnnotationRecord& record);
std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& ledger);

struct AnalysisSummary {
  double true_pass_pct = 0.0;
  double pass_correctness_mean = 0.0;
  double fail_correctness_mean = 0.0;
  double base_lang_error_pct = 0.0;
  double openacc_error_pct = 0.0;
  std::size_t n_pass = 0;
  std::size_t n_fail = 0;
  std::size_t n_true_pass = 0;
  std::size_t n_base_lang_error = 0;
  std::size_t n_openacc_error = 0;
};

AnalysisSummary summarize_annotations(const std::vector<AnnotationRecord>& annotations);

enum class ReportFormat { Markdown, Csv };
ReportFormat parse_report_format(std::string_view name);

std::string render_report(const std::vector<SuiteReport>& reports, const std::vector<LanguageBreakdown>& breakdowns,
                          const std::optional<AnalysisSummary>& summary, ReportFormat format);

}  // namespace vvgen
