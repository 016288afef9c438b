#include "vvgen/extractor.hpp"

#include <cctype>
#include <optional>
#include <regex>
#include <unordered_map>

#include "vvgen/error.hpp"

namespace vvgen {

namespace {

constexpr std::string_view kFence = "```";

struct Line {
  std::size_t begin;
  std::size_t end;  // exclusive, newline not included
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back({pos, nl});
    if (nl == text.size()) break;
    pos = nl + 1;
  }
  return lines;
}

std::string normalize(std::string_view code) {
  std::size_t b = 0;
  // Drop whole leading blank lines, keep indentation of the first code line.
  for (;;) {
    const auto nl = code.find('\n', b);
    if (nl == std::string_view::npos) break;
    if (!trim(code.substr(b, nl - b)).empty()) break;
    b = nl + 1;
  }
  std::size_t e = code.size();
  while (e > b && std::isspace(static_cast<unsigned char>(code[e - 1]))) --e;
  if (e == b) return {};
  std::string out(code.substr(b, e - b));
  out.push_back('\n');
  return out;
}

const std::regex& c_marker() {
  static const std::regex re(R"(#\s*include|\bint\s+main\s*\()");
  return re;
}

const std::regex& fortran_marker() {
  static const std::regex re(R"(\b(program|function|subroutine)\b)", std::regex::icase);
  return re;
}

bool has_marker(std::string_view code, Language lang) {
  const std::string s(code);
  return std::regex_search(s, lang == Language::Fortran ? fortran_marker() : c_marker());
}

struct FencedBlock {
  std::string_view content;
};

std::vector<FencedBlock> complete_fenced_blocks(std::string_view raw) {
  std::vector<FencedBlock> blocks;
  std::size_t pos = 0;
  for (;;) {
    const auto open = raw.find(kFence, pos);
    if (open == std::string_view::npos) break;
    const auto line_end = raw.find('\n', open);
    if (line_end == std::string_view::npos) break;
    const auto close = raw.find(kFence, line_end + 1);
    if (close == std::string_view::npos) break;
    blocks.push_back({raw.substr(line_end + 1, close - line_end - 1)});
    pos = close + kFence.size();
    // Skip the rest of the closing fence line (e.g. trailing backticks).
    const auto after = raw.find('\n', pos);
    pos = after == std::string_view::npos ? raw.size() : after + 1;
  }
  return blocks;
}

// Raw text with fence lines removed and stray fence sequences erased.
std::string without_fences(std::string_view raw) {
  std::string out;
  for (const auto& line : split_lines(raw)) {
    const auto text = raw.substr(line.begin, line.end - line.begin);
    if (trim(text).rfind(kFence, 0) == 0) continue;
    std::string cleaned(text);
    for (auto at = cleaned.find(kFence); at != std::string::npos; at = cleaned.find(kFence)) {
      cleaned.erase(at, kFence.size());
    }
    out += cleaned;
    out += '\n';
  }
  return out;
}

bool c_code_line(const std::string& trimmed) {
  static const std::regex re(
      R"(^(#\s*(include|define|pragma|ifdef|ifndef|if|endif)\b|//|/\*|(typedef|struct|using|namespace|template|static|extern|class|enum)\b|((unsigned|signed|long|short|const|static|inline)\s+)*(int|void|float|double|char|bool|long|short|size_t|auto|[A-Za-z_]\w*_t)\b[\s\*&]+\**\s*[A-Za-z_]\w*\s*\())");
  return std::regex_search(trimmed, re);
}

bool fortran_code_line(const std::string& trimmed) {
  static const std::regex re(
      R"(^(!|(program|module|subroutine|use|implicit|include)\b|((logical|integer|real|double\s+precision|complex|character|recursive|pure|elemental)(\s*\*\s*\d+)?\s+)*function\b))",
      std::regex::icase);
  return std::regex_search(trimmed, re);
}

bool fortran_terminator(const std::string& trimmed) {
  static const std::regex re(R"(^end(\s+(program|function|subroutine|module)\b.*)?$)", std::regex::icase);
  return std::regex_search(trimmed, re);
}

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// Offset just past the last `}` that closes a top-level block containing a
// depth-1 `return`, scanning from `from`.
std::optional<std::size_t> c_terminator(std::string_view s, std::size_t from) {
  std::optional<std::size_t> end;
  int depth = 0;
  bool block_returns = false;
  std::size_t i = from;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
      const auto nl = s.find('\n', i);
      i = nl == std::string_view::npos ? s.size() : nl;
      continue;
    }
    if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
      const auto close = s.find("*/", i + 2);
      i = close == std::string_view::npos ? s.size() : close + 2;
      continue;
    }
    if (c == '"') {
      // Only a literal when it closes on the same line.
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"' && s[j] != '\n') j += s[j] == '\\' ? 2 : 1;
      if (j < s.size() && s[j] == '"') {
        i = j + 1;
        continue;
      }
    }
    if (c == '\'') {
      const auto close = s.find('\'', i + 1);
      if (close != std::string_view::npos && close - i <= 4) {
        i = close + 1;
        continue;
      }
    }
    if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (depth > 0 && --depth == 0) {
        if (block_returns) end = i + 1;
        block_returns = false;
      }
    } else if (c == 'r' && depth == 1 && s.compare(i, 6, "return") == 0 &&
               (i == 0 || !ident_char(s[i - 1])) && (i + 6 >= s.size() || !ident_char(s[i + 6]))) {
      block_returns = true;
      i += 6;
      continue;
    }
    ++i;
  }
  return end;
}

std::optional<std::string> heuristic(std::string_view raw, Language lang) {
  const std::string text = without_fences(raw);
  const auto lines = split_lines(text);
  std::optional<std::size_t> first;
  for (std::size_t i = 0; i < lines.size() && !first; ++i) {
    const auto t = trim(std::string_view(text).substr(lines[i].begin, lines[i].end - lines[i].begin));
    if (lang == Language::Fortran ? fortran_code_line(t) : c_code_line(t)) first = i;
  }
  if (!first) return std::nullopt;

  const std::size_t begin = lines[*first].begin;
  if (lang == Language::Fortran) {
    std::optional<std::size_t> last;
    for (std::size_t i = *first; i < lines.size(); ++i) {
      const auto t = trim(std::string_view(text).substr(lines[i].begin, lines[i].end - lines[i].begin));
      if (fortran_terminator(t)) last = i;
    }
    if (!last) return std::nullopt;
    return normalize(std::string_view(text).substr(begin, lines[*last].end - begin));
  }
  const auto end = c_terminator(text, begin);
  if (!end) return std::nullopt;
  return normalize(std::string_view(text).substr(begin, *end - begin));
}

}  // namespace

std::string_view to_string(ExtractionMode mode) noexcept {
  return mode == ExtractionMode::Fenced ? "fenced" : "heuristic";
}

const std::string& outcome_prompt_id(const ExtractionOutcome& o) {
  return std::visit([](const auto& v) -> const std::string& { return v.prompt_id; }, o);
}

ExtractionOutcome extract_code(std::string_view raw, Language language) {
  for (const auto& block : complete_fenced_blocks(raw)) {
    if (!has_marker(block.content, language)) continue;
    auto code = normalize(block.content);
    if (!code.empty()) return ExtractedTest{{}, std::move(code), language, ExtractionMode::Fenced};
  }
  if (auto code = heuristic(raw, language); code && !code->empty()) {
    return ExtractedTest{{}, std::move(*code), language, ExtractionMode::Heuristic};
  }
  return ParsingFailure{{}, "no end of code found (no closing back-ticks and no terminating statement)"};
}

std::vector<ExtractionOutcome> extract_suite(const std::vector<GenerationRecord>& generations,
                                             const std::vector<PromptRecord>& prompts) {
  std::unordered_map<std::string, const PromptRecord*> by_id;
  for (const auto& p : prompts) by_id.emplace(p.id, &p);

  std::vector<ExtractionOutcome> out;
  out.reserve(generations.size());
  for (const auto& g : generations) {
    auto it = by_id.find(g.prompt_id);
    if (it == by_id.end()) throw Error(ErrorCode::DanglingPromptId, g.prompt_id);
    if (g.finish_reason == FinishReason::Error) {
      out.emplace_back(ParsingFailure{g.prompt_id, "generation failed: " + g.error});
      continue;
    }
    auto outcome = extract_code(g.raw_text, it->second->feature.base_language);
    std::visit([&](auto& v) { v.prompt_id = g.prompt_id; }, outcome);
    if (auto* failure = std::get_if<ParsingFailure>(&outcome);
        failure && g.finish_reason == FinishReason::Length) {
      failure->reason += " (output truncated at the token limit)";
    }
    out.push_back(std::move(outcome));
  }
  return out;
}

void write_extracted(const std::vector<ExtractionOutcome>& outcomes, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<Json> ledger;
  for (const auto& o : outcomes) {
    if (const auto* t = std::get_if<ExtractedTest>(&o)) {
      const std::string file = t->prompt_id + std::string(source_extension(t->language));
      write_file(dir / file, t->code);
      ledger.push_back({{"prompt_id", t->prompt_id},
                        {"status", "ok"},
                        {"language", to_string(t->language)},
                        {"mode", to_string(t->mode)},
                        {"file", file}});
    } else {
      const auto& f = std::get<ParsingFailure>(o);
      ledger.push_back({{"prompt_id", f.prompt_id}, {"status", "parsing_error"}, {"reason", f.reason}});
    }
  }
  write_jsonl(dir / "outcomes.jsonl", ledger);
}

std::vector<ExtractionOutcome> read_extracted(const std::filesystem::path& dir) {
  std::vector<ExtractionOutcome> out;
  for (const auto& row : read_jsonl(dir / "outcomes.jsonl")) {
    const auto id = row.at("prompt_id").get<std::string>();
    if (row.at("status").get<std::string>() == "ok") {
      ExtractedTest t;
      t.prompt_id = id;
      t.language = parse_language(row.at("language").get<std::string>());
      t.mode = row.value("mode", "fenced") == "fenced" ? ExtractionMode::Fenced : ExtractionMode::Heuristic;
      t.code = read_file(dir / row.at("file").get<std::string>());
      out.emplace_back(std::move(t));
    } else {
      out.emplace_back(ParsingFailure{id, row.value("reason", "")});
    }
  }
  return out;
}

}  // namespace vvgen
