#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vvgen/retrieval.hpp"
#include "vvgen/spec_corpus.hpp"

namespace vvgen {

struct FinetuneExample {
  std::string prompt;
  std::string completion;
  bool operator==(const FinetuneExample&) const = default;
};

struct DatasetManifest {
  std::size_t total = 0;
  std::map<Language, std::size_t> per_language;
  std::string spec_digest;
};

Json to_json(const DatasetManifest& manifest);

/// Section key for a manual test. A hint naming a key or title wins; otherwise
/// the section holding the best-matching chunk for the test text. Without
/// spans or chunks, whole sections are embedded and compared instead.
/// Throws NoMatch on an empty index.
std::string pair_test_with_section(std::string_view test_source, std::string_view feature_hint,
                                   const SpecIndex& index, const VectorStore& store,
                                   const EmbeddingProvider& provider);

/// Feature tag from a `T1:<tag>,V:...` comment, or empty.
std::string feature_tag(std::string_view test_source);

enum class FinetuneContext { Section, Chunks };

struct DatasetOptions {
  /// `{request}` and `{context}` are substituted.
  std::string prompt_frame = "{request}\n\nContext: {context}\n";
  FinetuneContext context = FinetuneContext::Section;
  std::size_t top_k = kDefaultTopK;
  /// Called for files that could not be read.
  std::function<void(const std::filesystem::path&, const std::string&)> warn;
};

struct Dataset {
  std::vector<FinetuneExample> examples;
  std::vector<std::string> section_keys;  // parallel to examples
  DatasetManifest manifest;
};

/// One example per test file under `suite_dir` (recursive, sorted by path).
/// Hints come from `features.json` in `suite_dir` (relative path or file
/// name -> key or title) or the test's own `T1:` tag.
Dataset build_dataset(const std::filesystem::path& suite_dir, const SpecIndex& index, const VectorStore& store,
                      const EmbeddingProvider& provider, const DatasetOptions& options = {});

/// One `{"prompt": ..., "completion": ...}` object per line.
std::string to_jsonl(const std::vector<FinetuneExample>& examples);
void emit_jsonl(const std::vector<FinetuneExample>& examples, const std::filesystem::path& out);
std::vector<FinetuneExample> parse_jsonl(std::string_view text);

}  // namespace vvgen
