#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vvgen/common.hpp"

namespace vvgen {

/// Byte range [start, end) in the source text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Span&) const = default;
};

struct TocEntry {
  std::string key;    // "2.5.1"
  std::string title;  // "Parallel Construct"
  int chapter = 0;
  int depth = 0;      // dot count + 1
  std::size_t char_offset = 0;
};

/// Line pattern recognising a heading. Group `key_group` captures the dotted
/// numeric key, `title_group` the title. Matched per line (ECMAScript regex).
struct HeadingPattern {
  std::string regex = R"(^(\d+(?:\.\d+)*)\.?[ \t]+(\S.*?)\s*$)";
  int key_group = 1;
  int title_group = 2;
};

struct SpecSection {
  std::string key;
  std::string title;
  std::string body;  // excludes the heading line
  Span span;         // heading start .. next heading start
  int chapter = 0;
  int depth = 0;
};

/// Immutable, document-ordered map from ToC key to section.
class SpecIndex {
 public:
  SpecIndex() = default;
  SpecIndex(std::vector<SpecSection> sections, std::string source_digest);

  const std::vector<SpecSection>& sections() const noexcept { return sections_; }
  const std::string& source_digest() const noexcept { return source_digest_; }
  std::size_t size() const noexcept { return sections_.size(); }
  bool empty() const noexcept { return sections_.empty(); }

  /// Accepts a ToC key or a section title (case-insensitive).
  const SpecSection* find(std::string_view key_or_title) const;
  bool contains(std::string_view key) const { return by_key_.count(std::string(key)) != 0; }

  /// True when some other key extends this one ("2.5" has child "2.5.1").
  bool is_leaf(std::string_view key) const;
  /// Parent section by key truncation, if present.
  const SpecSection* parent(std::string_view key) const;

  /// Spans are only known when the index was sliced from text, or imported with its ToC.
  bool has_spans() const noexcept { return has_spans_; }

 private:
  std::vector<SpecSection> sections_;
  std::unordered_map<std::string, std::size_t> by_key_;
  std::unordered_map<std::string, std::size_t> by_title_;
  std::string source_digest_;
  bool has_spans_ = true;

  friend SpecIndex import_spec_json(std::string_view, std::optional<std::string_view>);
};

std::vector<TocEntry> parse_toc(std::string_view source_text, const HeadingPattern& pattern = {});
SpecIndex slice_sections(std::string_view source_text, const std::vector<TocEntry>& toc);
const SpecSection& lookup_section(const SpecIndex& index, std::string_view feature_key);

/// Writes the `{key: body}` object in document order.
std::string export_spec_json(const SpecIndex& index);
/// Companion ToC (titles, spans) so an imported index keeps titles and spans.
std::string export_toc_json(const SpecIndex& index);
SpecIndex import_spec_json(std::string_view spec_json,
                           std::optional<std::string_view> toc_json = std::nullopt);

/// Section key/body equality, ignoring digests, titles and spans.
bool same_content(const SpecIndex& a, const SpecIndex& b);

/// Loads a spec index from either a plain-text spec or an exported spec JSON
/// (with `<stem>.toc.json` picked up when present next to it).
SpecIndex load_spec_index(const std::filesystem::path& path, const HeadingPattern& pattern = {});
std::filesystem::path toc_companion_path(const std::filesystem::path& spec_json_path);

}  // namespace vvgen
