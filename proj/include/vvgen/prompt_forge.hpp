#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vvgen/feature.hpp"
#include "vvgen/retrieval.hpp"
#include "vvgen/spec_corpus.hpp"

namespace vvgen {

enum class PromptMethod { Template, TemplateRag, OneShot, OneShotRag, ExpressiveTemplateRag };

inline constexpr std::array kAllPromptMethods = {
    PromptMethod::Template, PromptMethod::TemplateRag, PromptMethod::OneShot,
    PromptMethod::OneShotRag, PromptMethod::ExpressiveTemplateRag};

/// Stable identifier used in files ("TemplateRag").
std::string_view to_string(PromptMethod method) noexcept;
/// Column label used in reports ("Template + RAG").
std::string_view display_name(PromptMethod method) noexcept;
PromptMethod parse_prompt_method(std::string_view name);

constexpr bool is_rag(PromptMethod m) noexcept {
  return m == PromptMethod::TemplateRag || m == PromptMethod::OneShotRag ||
         m == PromptMethod::ExpressiveTemplateRag;
}
constexpr bool uses_oneshot(PromptMethod m) noexcept {
  return m == PromptMethod::OneShot || m == PromptMethod::OneShotRag;
}

struct OneShotExample {
  std::string prompt;
  std::string test;
};

/// Per-language code templates and one-shot examples.
struct AssetLibrary {
  std::map<Language, std::string> templates;
  std::map<Language, OneShotExample> oneshot;
};

/// Reads `templates/<lang>` and `oneshot/<lang>/{prompt,test}`; a file may
/// carry an extension (`templates/C.c`). Missing entries are simply absent.
AssetLibrary load_assets(const std::filesystem::path& dir);

struct PromptRecord {
  std::string id;
  std::string stage;
  std::string llm;
  PromptMethod method = PromptMethod::Template;
  FeatureSpec feature;
  std::string text;
  std::vector<std::string> context_provenance;
  std::optional<std::string> template_id;
  std::optional<std::string> oneshot_id;

  bool operator==(const PromptRecord&) const = default;
};

std::string make_prompt_id(std::string_view stage, std::string_view llm, PromptMethod method,
                           const FeatureSpec& feature);

Json to_json(const PromptRecord& record);
PromptRecord prompt_from_json(const Json& j);

struct FeatureSelection {
  std::vector<int> chapters{2, 3};
  /// Keys removed together with their descendants.
  std::vector<std::string> exclude;
  /// When non-empty, only these keys (and descendants) are eligible.
  std::vector<std::string> include;
};

/// Lowercased title; clause entries get their parent construct as a prefix.
std::string derive_feature_name(const SpecIndex& index, const SpecSection& section);

std::vector<FeatureSpec> enumerate_features(const SpecIndex& index, const FeatureSelection& selection,
                                            const std::vector<Language>& languages);

/// Features whose key starts with `key_prefix` (and whose name matches
/// `name_pattern`, if set) are replaced by one feature per variant.
struct PermutationRule {
  std::string key_prefix;
  std::string name_pattern;  // ECMAScript regex searched in the feature name
  std::string placeholder;   // substring replaced by the variant; prefixed when absent
  std::vector<std::string> variants;
};
using PermutationRules = std::vector<PermutationRule>;

/// Compute-construct clauses permuted over parallel, serial and kernels.
PermutationRules default_compute_construct_rules();

std::vector<FeatureSpec> expand_permutations(const std::vector<FeatureSpec>& features,
                                             const PermutationRules& rules);

PromptRecord render_prompt(PromptMethod method, const FeatureSpec& feature, const AssetLibrary& assets,
                           const RetrievedContext& context);

struct StagePlan {
  std::string name;
  std::vector<std::string> llms;
  std::vector<PromptMethod> methods;
  std::vector<Language> languages{Language::C};
  FeatureSelection selection;
  PermutationRules permutation_rules;
  RagMode rag_mode = RagMode::Similarity;
  std::size_t top_k = kDefaultTopK;
  std::string compiler_profile;
};

struct SuiteCount {
  std::string stage;
  std::string llm;
  PromptMethod method;
  std::size_t prompts = 0;
};

struct PlanArithmetic {
  std::vector<SuiteCount> suites;
  std::size_t total_prompts = 0;
};

/// Suite and prompt counts for a plan, from the feature enumeration alone.
PlanArithmetic plan_arithmetic(const std::vector<StagePlan>& stages, const SpecIndex& index);

/// Renders every prompt of every suite, in plan order
/// (stage, llm, method, feature).
std::vector<PromptRecord> build_prompt_suite(const std::vector<StagePlan>& stages,
                                             const SpecIndex& index, const VectorStore& store,
                                             const AssetLibrary& assets,
                                             const EmbeddingProvider& provider);

}  // namespace vvgen
