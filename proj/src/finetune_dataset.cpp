#include "vvgen/finetune_dataset.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "vvgen/error.hpp"
#include "vvgen/prompt_forge.hpp"

namespace vvgen {

namespace {

// Single pass over `frame`; substituted text is never rescanned.
std::string fill(std::string_view frame, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < frame.size()) {
    bool hit = false;
    if (frame[i] == '{') {
      for (const auto& [name, value] : values) {
        const std::string slot = "{" + name + "}";
        if (frame.compare(i, slot.size(), slot) == 0) {
          out += value;
          i += slot.size();
          hit = true;
          break;
        }
      }
    }
    if (!hit) out.push_back(frame[i++]);
  }
  return out;
}

const SpecSection* resolve_hint(const SpecIndex& index, std::string_view hint) {
  const auto h = trim(hint);
  if (h.empty()) return nullptr;
  if (const auto* s = index.find(h)) return s;
  std::string spaced = h;
  std::replace(spaced.begin(), spaced.end(), '-', ' ');
  for (const char* suffix : {"", " construct", " clause", " directive"}) {
    if (const auto* s = index.find(spaced + suffix)) return s;
  }
  return nullptr;
}

std::size_t overlap(const Span& a, const Span& b) {
  const auto lo = std::max(a.start, b.start);
  const auto hi = std::min(a.end, b.end);
  return hi > lo ? hi - lo : 0;
}

}  // namespace

Json to_json(const DatasetManifest& m) {
  Json per = Json::object();
  for (const auto& [lang, n] : m.per_language) per[std::string(to_string(lang))] = n;
  return {{"total", m.total}, {"per_language", per}, {"spec_digest", m.spec_digest}};
}

std::string feature_tag(std::string_view src) {
  static const std::regex re(R"(T1:\s*([^,\s]+)[^\n]*V:)");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(src.begin(), src.end(), m, re)) return m[1].str();
  return {};
}

std::string pair_test_with_section(std::string_view test_source, std::string_view feature_hint,
                                   const SpecIndex& index, const VectorStore& store,
                                   const EmbeddingProvider& provider) {
  if (index.empty()) throw Error(ErrorCode::NoMatch, "empty spec index");
  if (const auto* s = resolve_hint(index, feature_hint)) return s->key;

  std::string query(feature_hint);
  if (!query.empty()) query += '\n';
  query += test_source;
  const auto q = provider.embed(query);

  if (!store.empty() && index.has_spans() && store.dims() == q.dims()) {
    const auto top = similarity_search(store, q, 1);
    const auto* entry = store.find(top.front().chunk_id);
    const SpecSection* best = nullptr;
    std::size_t best_overlap = 0;
    for (const auto& s : index.sections()) {
      const auto o = overlap(s.span, entry->span);
      if (o > best_overlap) {
        best = &s;
        best_overlap = o;
      }
    }
    if (best != nullptr) return best->key;
  }

  const SpecSection* best = &index.sections().front();
  double best_score = -2.0;
  for (const auto& s : index.sections()) {
    const double score = cosine_similarity(q, provider.embed(s.title + "\n" + s.body));
    if (score > best_score) {
      best = &s;
      best_score = score;
    }
  }
  return best->key;
}

Dataset build_dataset(const std::filesystem::path& suite_dir, const SpecIndex& index, const VectorStore& store,
                      const EmbeddingProvider& provider, const DatasetOptions& options) {
  namespace fs = std::filesystem;
  Dataset out;
  out.manifest.spec_digest = index.source_digest();
  if (!fs::is_directory(suite_dir)) throw Error(ErrorCode::UnreadableFile, suite_dir.string() + " is not a directory");

  std::map<std::string, std::string> hints;
  if (const auto sidecar = suite_dir / "features.json"; fs::exists(sidecar)) {
    const auto sidecar_json = Json::parse(read_file(sidecar));
    for (const auto& [name, key] : sidecar_json.items()) hints[name] = key.get<std::string>();
  }

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(suite_dir)) {
    if (e.is_regular_file() && language_from_extension(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  for (const auto& path : files) {
    const auto lang = *language_from_extension(path);
    std::string source;
    try {
      source = read_file(path);
    } catch (const Error& e) {
      if (options.warn) options.warn(path, e.what());
      continue;
    }
    if (source.empty()) {
      if (options.warn) options.warn(path, "empty test file");
      continue;
    }

    std::string hint;
    const auto rel = fs::relative(path, suite_dir).generic_string();
    if (auto it = hints.find(rel); it != hints.end()) {
      hint = it->second;
    } else if (auto by_name = hints.find(path.filename().string()); by_name != hints.end()) {
      hint = by_name->second;
    } else {
      hint = feature_tag(source);
    }

    const auto key = pair_test_with_section(source, hint, index, store, provider);
    const auto& section = lookup_section(index, key);
    const FeatureSpec feature{derive_feature_name(index, section), key, lang, std::nullopt};

    std::string context;
    if (options.context == FinetuneContext::Chunks && !store.empty()) {
      context = retrieve_context(index, store, feature, RagMode::Similarity, options.top_k, provider).text;
    } else {
      context = section.body;
    }

    out.examples.push_back({fill(options.prompt_frame, {{"request", request_sentence(feature)}, {"context", context}}),
                            std::move(source)});
    out.section_keys.push_back(key);
    ++out.manifest.per_language[lang];
    ++out.manifest.total;
  }
  return out;
}

std::string to_jsonl(const std::vector<FinetuneExample>& examples) {
  std::string out;
  for (const auto& e : examples) {
    Json row;
    row["prompt"] = e.prompt;
    row["completion"] = e.completion;
    out += row.dump();
    out += '\n';
  }
  return out;
}

void emit_jsonl(const std::vector<FinetuneExample>& examples, const std::filesystem::path& out) {
  write_file(out, to_jsonl(examples));
}

std::vector<FinetuneExample> parse_jsonl(std::string_view text) {
  std::vector<FinetuneExample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto j = Json::parse(line);
    out.push_back({j.at("prompt").get<std::string>(), j.at("completion").get<std::string>()});
  }
  return out;
}

}  // namespace vvgen
