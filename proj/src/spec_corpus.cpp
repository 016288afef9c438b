#include "vvgen/spec_corpus.hpp"

#include <algorithm>
#include <regex>
#include <unordered_set>

#include "vvgen/error.hpp"

namespace vvgen {

namespace {

int chapter_of(std::string_view key) {
  const auto dot = key.find('.');
  return std::stoi(std::string(key.substr(0, dot)));
}

int depth_of(std::string_view key) {
  return static_cast<int>(std::count(key.begin(), key.end(), '.')) + 1;
}

std::size_t line_end(std::string_view text, std::size_t from) {
  const auto nl = text.find('\n', from);
  return nl == std::string_view::npos ? text.size() : nl;
}

}  // namespace

SpecIndex::SpecIndex(std::vector<SpecSection> sections, std::string source_digest)
    : sections_(std::move(sections)), source_digest_(std::move(source_digest)) {
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const auto& s = sections_[i];
    if (!by_key_.emplace(s.key, i).second) throw Error(ErrorCode::DuplicateKey, s.key);
    if (!s.title.empty()) by_title_.emplace(to_lower(s.title), i);
  }
}

const SpecSection* SpecIndex::find(std::string_view key_or_title) const {
  if (auto it = by_key_.find(std::string(key_or_title)); it != by_key_.end()) {
    return &sections_[it->second];
  }
  if (auto it = by_title_.find(to_lower(trim(key_or_title))); it != by_title_.end()) {
    return &sections_[it->second];
  }
  return nullptr;
}

bool SpecIndex::is_leaf(std::string_view key) const {
  const std::string prefix = std::string(key) + ".";
  return std::none_of(sections_.begin(), sections_.end(), [&](const SpecSection& s) {
    return s.key.size() > prefix.size() && s.key.compare(0, prefix.size(), prefix) == 0;
  });
}

const SpecSection* SpecIndex::parent(std::string_view key) const {
  const auto dot = key.rfind('.');
  if (dot == std::string_view::npos) return nullptr;
  auto it = by_key_.find(std::string(key.substr(0, dot)));
  return it == by_key_.end() ? nullptr : &sections_[it->second];
}

std::vector<TocEntry> parse_toc(std::string_view source_text, const HeadingPattern& pattern) {
  const std::regex re(pattern.regex, std::regex::ECMAScript | std::regex::optimize);
  std::vector<TocEntry> entries;
  std::unordered_set<std::string> seen;

  std::size_t pos = 0;
  while (pos < source_text.size()) {
    const std::size_t end = line_end(source_text, pos);
    std::string line(source_text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::smatch m;
    if (std::regex_match(line, m, re)) {
      TocEntry e;
      e.key = m[pattern.key_group].str();
      e.title = trim(m[pattern.title_group].str());
      e.chapter = chapter_of(e.key);
      e.depth = depth_of(e.key);
      e.char_offset = pos;
      if (!seen.insert(e.key).second) throw Error(ErrorCode::DuplicateKey, e.key);
      entries.push_back(std::move(e));
    }
    pos = end + 1;
  }
  if (entries.empty()) throw Error(ErrorCode::NoHeadingsFound, "no line matched the heading pattern");
  return entries;
}

SpecIndex slice_sections(std::string_view source_text, const std::vector<TocEntry>& toc) {
  std::vector<SpecSection> sections;
  sections.reserve(toc.size());
  for (std::size_t i = 0; i < toc.size(); ++i) {
    const auto& e = toc[i];
    if (e.char_offset >= source_text.size()) {
      throw Error(ErrorCode::OffsetOutOfRange,
                  e.key + " at " + std::to_string(e.char_offset) + " beyond text length " +
                      std::to_string(source_text.size()));
    }
    const std::size_t next = i + 1 < toc.size() ? toc[i + 1].char_offset : source_text.size();
    if (next < e.char_offset || next > source_text.size()) {
      throw Error(ErrorCode::OffsetOutOfRange, "ToC not sorted by offset at " + e.key);
    }
    // Body starts after the heading line's newline, clamped to the section end.
    const std::size_t body_start = std::min(line_end(source_text, e.char_offset) + 1, next);

    SpecSection s;
    s.key = e.key;
    s.title = e.title;
    s.body = std::string(source_text.substr(body_start, next - body_start));
    s.span = {e.char_offset, next};
    s.chapter = e.chapter;
    s.depth = e.depth;
    sections.push_back(std::move(s));
  }
  return SpecIndex(std::move(sections), sha256_hex(source_text));
}

const SpecSection& lookup_section(const SpecIndex& index, std::string_view feature_key) {
  if (const auto* s = index.find(feature_key)) return *s;
  throw Error(ErrorCode::UnknownKey, std::string(feature_key));
}

std::string export_spec_json(const SpecIndex& index) {
  Json obj = Json::object();
  for (const auto& s : index.sections()) obj[s.key] = s.body;
  return obj.dump(2) + "\n";
}

std::string export_toc_json(const SpecIndex& index) {
  Json arr = Json::array();
  for (const auto& s : index.sections()) {
    arr.push_back({{"key", s.key},
                   {"title", s.title},
                   {"chapter", s.chapter},
                   {"depth", s.depth},
                   {"span", {s.span.start, s.span.end}}});
  }
  Json doc = {{"source_digest", index.source_digest()}, {"entries", std::move(arr)}};
  return doc.dump(2) + "\n";
}

SpecIndex import_spec_json(std::string_view spec_json, std::optional<std::string_view> toc_json) {
  Json doc;
  try {
    doc = Json::parse(spec_json);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("spec JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "spec JSON must be an object");

  std::unordered_map<std::string, Json> toc_by_key;
  std::string digest = sha256_hex(spec_json);
  if (toc_json) {
    const Json toc = Json::parse(*toc_json);
    digest = toc.value("source_digest", digest);
    for (const auto& e : toc.at("entries")) toc_by_key[e.at("key").get<std::string>()] = e;
  }

  std::vector<SpecSection> sections;
  bool spans = toc_json.has_value();
  for (const auto& [key, value] : doc.items()) {
    SpecSection s;
    s.key = key;
    s.body = value.get<std::string>();
    s.chapter = chapter_of(key);
    s.depth = depth_of(key);
    if (auto it = toc_by_key.find(key); it != toc_by_key.end()) {
      s.title = it->second.value("title", "");
      const auto& span = it->second.at("span");
      s.span = {span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()};
    } else {
      spans = false;
    }
    sections.push_back(std::move(s));
  }
  SpecIndex index(std::move(sections), std::move(digest));
  index.has_spans_ = spans;
  return index;
}

bool same_content(const SpecIndex& a, const SpecIndex& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.sections()[i].key != b.sections()[i].key) return false;
    if (a.sections()[i].body != b.sections()[i].body) return false;
  }
  return true;
}

std::filesystem::path toc_companion_path(const std::filesystem::path& spec_json_path) {
  auto p = spec_json_path;
  p.replace_extension(".toc.json");
  return p;
}

SpecIndex load_spec_index(const std::filesystem::path& path, const HeadingPattern& pattern) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (path.extension() == ".json" || (first != std::string::npos && text[first] == '{')) {
    const auto toc_path = toc_companion_path(path);
    if (std::filesystem::exists(toc_path)) {
      const std::string toc = read_file(toc_path);
      return import_spec_json(text, std::string_view(toc));
    }
    return import_spec_json(text);
  }
  return slice_sections(text, parse_toc(text, pattern));
}

}  // namespace vvgen
