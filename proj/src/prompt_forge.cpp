#include "vvgen/prompt_forge.hpp"

#include <algorithm>
#include <regex>
#include <unordered_map>

#include "vvgen/error.hpp"

namespace vvgen {

namespace {

// Expressive frame, reproduced byte for byte (including the space after the
// first sentence).
constexpr std::string_view kExpressiveFrame =
    "Write a code in {language} to verify compiler implementation of the OpenACC specification of {feature}. \n"
    "\n"
    "Make sure to follow the template of the format provided. Include the provided header file, and any other necessary libraries.\n"
    "Write simple code to test {feature} in {language}. Try to isolate that feature while still using it correctly.\n"
    "This code is part of a testsuite that will be ran, so write complete code, don't leave it unfinished.\n"
    "The goal is to return 0 if the target feature, {feature}, is working properly, and not zero otherwise.\n"
    "The context below is from the most recent OpenACC specification, make sure to refer to it to produce up to date code.\n"
    "\n"
    "Context: {context}\n"
    "\n"
    "Template: {template}\n";

constexpr std::string_view kTemplateFrame = "{request}\n\nTemplate: {template}\n";
constexpr std::string_view kTemplateRagFrame = "{request}\n\nContext: {context}\n\nTemplate: {template}\n";
constexpr std::string_view kOneShotFrame = "{example_prompt}\n\n{example_test}\n\n{request}\n";
constexpr std::string_view kOneShotRagFrame =
    "{example_prompt}\n\n{example_test}\n\nContext: {context}\n\n{request}\n";

using Fields = std::unordered_map<std::string_view, std::string_view>;

// Single pass: substituted values are never rescanned for placeholders.
std::string fill(std::string_view frame, const Fields& fields) {
  std::string out;
  out.reserve(frame.size() + 4096);
  std::size_t pos = 0;
  while (pos < frame.size()) {
    const auto open = frame.find('{', pos);
    if (open == std::string_view::npos) break;
    const auto close = frame.find('}', open);
    if (close == std::string_view::npos) break;
    const auto name = frame.substr(open + 1, close - open - 1);
    out.append(frame.substr(pos, open - pos));
    if (auto it = fields.find(name); it != fields.end()) {
      out.append(it->second);
    } else {
      out.append(frame.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(frame.substr(pos));
  return out;
}

bool key_within(std::string_view key, std::string_view root) {
  if (key == root) return true;
  return key.size() > root.size() && key.substr(0, root.size()) == root && key[root.size()] == '.';
}

std::string singular_construct(std::string title) {
  for (std::string_view plural : {"constructs", "directives"}) {
    if (title.size() >= plural.size() &&
        title.compare(title.size() - plural.size(), plural.size(), plural) == 0) {
      title.pop_back();
      break;
    }
  }
  return title;
}

std::optional<std::string> find_file(const std::filesystem::path& dir, std::string_view stem) {
  const auto exact = dir / std::string(stem);
  if (std::filesystem::is_regular_file(exact)) return read_file(exact);
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  std::vector<std::filesystem::path> candidates;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().stem() == std::string(stem)) {
      candidates.push_back(entry.path());
    }
  }
  if (candidates.empty()) return std::nullopt;
  std::sort(candidates.begin(), candidates.end());
  return read_file(candidates.front());
}

}  // namespace

std::string_view to_string(PromptMethod method) noexcept {
  switch (method) {
    case PromptMethod::Template: return "Template";
    case PromptMethod::TemplateRag: return "TemplateRag";
    case PromptMethod::OneShot: return "OneShot";
    case PromptMethod::OneShotRag: return "OneShotRag";
    case PromptMethod::ExpressiveTemplateRag: return "ExpressiveTemplateRag";
  }
  return "?";
}

std::string_view display_name(PromptMethod method) noexcept {
  switch (method) {
    case PromptMethod::Template: return "Template";
    case PromptMethod::TemplateRag: return "Template + RAG";
    case PromptMethod::OneShot: return "Oneshot";
    case PromptMethod::OneShotRag: return "Oneshot + RAG";
    case PromptMethod::ExpressiveTemplateRag: return "Expressive + Template + RAG";
  }
  return "?";
}

PromptMethod parse_prompt_method(std::string_view name) {
  for (auto m : kAllPromptMethods) {
    if (name == to_string(m) || name == display_name(m)) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown prompt method '" + std::string(name) + "'");
}

AssetLibrary load_assets(const std::filesystem::path& dir) {
  AssetLibrary assets;
  for (auto lang : {Language::C, Language::Cpp, Language::Fortran}) {
    const std::string name(to_string(lang));
    if (auto t = find_file(dir / "templates", name)) assets.templates[lang] = std::move(*t);
    const auto shot_dir = dir / "oneshot" / name;
    auto prompt = find_file(shot_dir, "prompt");
    auto test = find_file(shot_dir, "test");
    if (prompt && test) assets.oneshot[lang] = {std::move(*prompt), std::move(*test)};
  }
  return assets;
}

std::string make_prompt_id(std::string_view stage, std::string_view llm, PromptMethod method,
                           const FeatureSpec& feature) {
  std::string material;
  for (std::string_view part : {stage, llm, to_string(method), std::string_view(feature.name),
                                std::string_view(feature.section_key),
                                to_string(feature.base_language)}) {
    material.append(part);
    material.push_back('\x1f');
  }
  return sha256_hex(material).substr(0, 16);
}

Json to_json(const PromptRecord& r) {
  Json j = {{"id", r.id},
            {"stage", r.stage},
            {"llm", r.llm},
            {"method", to_string(r.method)},
            {"feature", to_json(r.feature)},
            {"text", r.text},
            {"context_provenance", r.context_provenance}};
  j["template_id"] = r.template_id ? Json(*r.template_id) : Json(nullptr);
  j["oneshot_id"] = r.oneshot_id ? Json(*r.oneshot_id) : Json(nullptr);
  return j;
}

PromptRecord prompt_from_json(const Json& j) {
  PromptRecord r;
  r.id = j.at("id").get<std::string>();
  r.stage = j.value("stage", "");
  r.llm = j.value("llm", "");
  r.method = parse_prompt_method(j.at("method").get<std::string>());
  r.feature = feature_from_json(j.at("feature"));
  r.text = j.at("text").get<std::string>();
  r.context_provenance = j.value("context_provenance", std::vector<std::string>{});
  if (j.contains("template_id") && !j["template_id"].is_null()) r.template_id = j["template_id"].get<std::string>();
  if (j.contains("oneshot_id") && !j["oneshot_id"].is_null()) r.oneshot_id = j["oneshot_id"].get<std::string>();
  return r;
}

std::string derive_feature_name(const SpecIndex& index, const SpecSection& section) {
  std::string name = to_lower(trim(section.title));
  if (name.empty()) name = section.key;
  const bool is_clause = name.size() >= 6 && name.compare(name.size() - 6, 6, "clause") == 0;
  if (is_clause) {
    if (const auto* parent = index.parent(section.key); parent && !parent->title.empty()) {
      name = singular_construct(to_lower(trim(parent->title))) + " " + name;
    }
  }
  return name;
}

std::vector<FeatureSpec> enumerate_features(const SpecIndex& index, const FeatureSelection& selection,
                                            const std::vector<Language>& languages) {
  if (selection.chapters.empty()) throw Error(ErrorCode::EmptySelection, "no chapters selected");

  std::vector<const SpecSection*> picked;
  for (const auto& s : index.sections()) {
    if (std::find(selection.chapters.begin(), selection.chapters.end(), s.chapter) ==
        selection.chapters.end()) {
      continue;
    }
    if (!index.is_leaf(s.key)) continue;
    const auto in = [&](const std::vector<std::string>& roots) {
      return std::any_of(roots.begin(), roots.end(),
                         [&](const std::string& root) { return key_within(s.key, root); });
    };
    if (in(selection.exclude)) continue;
    if (!selection.include.empty() && !in(selection.include)) continue;
    picked.push_back(&s);
  }
  if (picked.empty() || languages.empty()) {
    throw Error(ErrorCode::EmptySelection, "no ToC entries match the feature selection");
  }

  std::vector<FeatureSpec> features;
  features.reserve(picked.size() * languages.size());
  for (auto lang : languages) {
    for (const auto* s : picked) {
      features.push_back({derive_feature_name(index, *s), s->key, lang, std::nullopt});
    }
  }
  return features;
}

PermutationRules default_compute_construct_rules() {
  return {{"2.5.", "clause$", "compute construct",
           {"parallel construct", "serial construct", "kernels construct"}}};
}

std::vector<FeatureSpec> expand_permutations(const std::vector<FeatureSpec>& features,
                                             const PermutationRules& rules) {
  std::vector<std::optional<std::regex>> patterns;
  for (const auto& r : rules) {
    patterns.push_back(r.name_pattern.empty() ? std::nullopt
                                              : std::optional<std::regex>(std::regex(r.name_pattern)));
  }

  std::vector<FeatureSpec> out;
  for (const auto& f : features) {
    const PermutationRule* rule = nullptr;
    for (std::size_t i = 0; i < rules.size() && rule == nullptr; ++i) {
      if (f.section_key.compare(0, rules[i].key_prefix.size(), rules[i].key_prefix) != 0) continue;
      if (patterns[i] && !std::regex_search(f.name, *patterns[i])) continue;
      rule = &rules[i];
    }
    if (rule == nullptr) {
      out.push_back(f);
      continue;
    }
    for (const auto& variant : rule->variants) {
      FeatureSpec p = f;
      const auto at = rule->placeholder.empty() ? std::string::npos : p.name.find(rule->placeholder);
      if (at != std::string::npos) {
        p.name.replace(at, rule->placeholder.size(), variant);
      } else {
        p.name = variant + " " + p.name;
      }
      p.permutation_of = variant;
      out.push_back(std::move(p));
    }
  }
  return out;
}

PromptRecord render_prompt(PromptMethod method, const FeatureSpec& feature, const AssetLibrary& assets,
                           const RetrievedContext& context) {
  const std::string lang(to_string(feature.base_language));
  const std::string request = request_sentence(feature);
  Fields fields{{"language", lang}, {"feature", feature.name}, {"request", request}};

  PromptRecord r;
  r.method = method;
  r.feature = feature;

  if (is_rag(method)) {
    if (context.text.empty()) {
      throw Error(ErrorCode::EmptyContext, "no specification context for '" + feature.name + "'");
    }
    fields["context"] = context.text;
    r.context_provenance = context.provenance;
  }
  if (uses_oneshot(method)) {
    auto it = assets.oneshot.find(feature.base_language);
    if (it == assets.oneshot.end()) throw Error(ErrorCode::MissingAsset, lang + " one-shot example");
    fields["example_prompt"] = it->second.prompt;
    fields["example_test"] = it->second.test;
    r.oneshot_id = "oneshot/" + lang;
  } else {
    auto it = assets.templates.find(feature.base_language);
    if (it == assets.templates.end()) throw Error(ErrorCode::MissingAsset, lang + " template");
    fields["template"] = it->second;
    r.template_id = "templates/" + lang;
  }

  switch (method) {
    case PromptMethod::Template: r.text = fill(kTemplateFrame, fields); break;
    case PromptMethod::TemplateRag: r.text = fill(kTemplateRagFrame, fields); break;
    case PromptMethod::OneShot: r.text = fill(kOneShotFrame, fields); break;
    case PromptMethod::OneShotRag: r.text = fill(kOneShotRagFrame, fields); break;
    case PromptMethod::ExpressiveTemplateRag: r.text = fill(kExpressiveFrame, fields); break;
  }
  r.id = make_prompt_id("", "", method, feature);
  return r;
}

namespace {

std::vector<FeatureSpec> stage_features(const StagePlan& stage, const SpecIndex& index) {
  return expand_permutations(enumerate_features(index, stage.selection, stage.languages),
                             stage.permutation_rules);
}

}  // namespace

PlanArithmetic plan_arithmetic(const std::vector<StagePlan>& stages, const SpecIndex& index) {
  PlanArithmetic out;
  for (const auto& stage : stages) {
    const std::size_t n = stage_features(stage, index).size();
    for (const auto& llm : stage.llms) {
      for (auto method : stage.methods) {
        out.suites.push_back({stage.name, llm, method, n});
        out.total_prompts += n;
      }
    }
  }
  return out;
}

std::vector<PromptRecord> build_prompt_suite(const std::vector<StagePlan>& stages,
                                             const SpecIndex& index, const VectorStore& store,
                                             const AssetLibrary& assets,
                                             const EmbeddingProvider& provider) {
  std::vector<PromptRecord> out;
  for (const auto& stage : stages) {
    const auto features = stage_features(stage, index);
    // Context depends only on the feature, so it is retrieved once per stage.
    std::vector<std::optional<RetrievedContext>> contexts(features.size());
    const bool any_rag = std::any_of(stage.methods.begin(), stage.methods.end(), is_rag);
    if (any_rag) {
      for (std::size_t i = 0; i < features.size(); ++i) {
        contexts[i] = retrieve_context(index, store, features[i], stage.rag_mode, stage.top_k, provider);
      }
    }
    static const RetrievedContext kNoContext;
    for (const auto& llm : stage.llms) {
      for (auto method : stage.methods) {
        for (std::size_t i = 0; i < features.size(); ++i) {
          auto r = render_prompt(method, features[i], assets, contexts[i] ? *contexts[i] : kNoContext);
          r.stage = stage.name;
          r.llm = llm;
          r.id = make_prompt_id(stage.name, llm, method, features[i]);
          out.push_back(std::move(r));
        }
      }
    }
  }
  return out;
}

}  // namespace vvgen
