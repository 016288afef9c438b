#include "vvgen/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <set>
#include <unordered_map>

#include "vvgen/analytics.hpp"
#include "vvgen/extractor.hpp"
#include "vvgen/process.hpp"
#include "vvgen/retrieval.hpp"

namespace vvgen {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

FeatureSelection selection_from_json(const Json& j, FeatureSelection s = {}) {
  if (j.contains("chapters")) s.chapters = j["chapters"].get<std::vector<int>>();
  if (j.contains("exclude")) s.exclude = j["exclude"].get<std::vector<std::string>>();
  if (j.contains("include")) s.include = j["include"].get<std::vector<std::string>>();
  return s;
}

PermutationRules rules_from_json(const Json& j) {
  PermutationRules rules;
  for (const auto& r : j) {
    rules.push_back({r.at("key_prefix").get<std::string>(), r.value("name_pattern", ""), r.value("placeholder", ""),
                     r.at("variants").get<std::vector<std::string>>()});
  }
  return rules;
}

bool needs_template(PromptMethod m) {
  return m == PromptMethod::Template || m == PromptMethod::TemplateRag || m == PromptMethod::ExpressiveTemplateRag;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::string material;
  for (const auto& f : files) {
    material += fs::relative(f, dir).generic_string();
    material += '\x1f';
    material += sha256_hex(read_file(f));
    material += '\n';
  }
  return sha256_hex(material);
}

std::string digest_of(std::initializer_list<std::string_view> parts) {
  std::string material;
  for (auto p : parts) {
    material.append(p);
    material.push_back('\x1f');
  }
  return sha256_hex(material);
}

Json stage_json(const StagePlan& s) {
  Json rules = Json::array();
  for (const auto& r : s.permutation_rules) {
    rules.push_back({{"key_prefix", r.key_prefix},
                     {"name_pattern", r.name_pattern},
                     {"placeholder", r.placeholder},
                     {"variants", r.variants}});
  }
  Json methods = Json::array();
  for (auto m : s.methods) methods.push_back(to_string(m));
  Json langs = Json::array();
  for (auto l : s.languages) langs.push_back(to_string(l));
  return {{"name", s.name},
          {"llms", s.llms},
          {"methods", methods},
          {"languages", langs},
          {"chapters", s.selection.chapters},
          {"exclude", s.selection.exclude},
          {"include", s.selection.include},
          {"permutation_rules", rules},
          {"rag_mode", to_string(s.rag_mode)},
          {"top_k", s.top_k},
          {"compiler_profile", s.compiler_profile}};
}

std::string profiles_digest(const std::map<std::string, ProfileSet>& profiles) {
  Json j = Json::object();
  for (const auto& [name, set] : profiles) {
    Json langs = Json::object();
    for (const auto& [lang, p] : set.by_language) {
      langs[std::string(to_string(lang))] = {
          {"command", p.compile_command}, {"env", p.env}, {"headers", p.support_headers}};
    }
    j[name] = langs;
  }
  return sha256_hex(j.dump());
}

}  // namespace

StagePlan stage_from_json(const Json& j, const FeatureSelection& default_selection,
                          const std::map<std::string, PermutationRules>& rules) {
  StagePlan s;
  s.name = j.at("name").get<std::string>();
  s.llms = j.at("llms").get<std::vector<std::string>>();
  for (const auto& m : j.at("methods")) s.methods.push_back(parse_prompt_method(m.get<std::string>()));
  if (j.contains("languages")) {
    s.languages.clear();
    for (const auto& l : j["languages"]) s.languages.push_back(parse_language(l.get<std::string>()));
  }
  s.selection = j.contains("selection") ? selection_from_json(j["selection"], default_selection) : default_selection;
  if (j.contains("permutation_rules") && !j["permutation_rules"].is_null()) {
    const auto& ref = j["permutation_rules"];
    if (ref.is_array()) {
      s.permutation_rules = rules_from_json(ref);
    } else {
      const auto name = ref.get<std::string>();
      auto it = rules.find(name);
      if (it != rules.end()) {
        s.permutation_rules = it->second;
      } else if (name == "compute-constructs") {
        s.permutation_rules = default_compute_construct_rules();
      } else {
        throw Error(ErrorCode::InvalidConfig, s.name + ": unknown permutation rule set '" + name + "'");
      }
    }
  }
  if (j.contains("rag_mode")) s.rag_mode = parse_rag_mode(j["rag_mode"].get<std::string>());
  s.top_k = j.value("top_k", kDefaultTopK);
  s.compiler_profile = j.value("compiler_profile", "");
  if (s.llms.empty() || s.methods.empty()) {
    throw Error(ErrorCode::InvalidConfig, s.name + ": a stage needs at least one llm and one method");
  }
  return s;
}

PipelineConfig load_plan(const fs::path& plan_path) {
  const auto base = plan_path.has_parent_path() ? plan_path.parent_path() : fs::path(".");
  const auto j = Json::parse(read_file(plan_path));
  PipelineConfig c;
  c.name = j.value("name", plan_path.stem().string());
  c.spec_path = resolve(base, j.at("spec").get<std::string>());
  if (j.contains("heading_pattern")) c.heading.regex = j["heading_pattern"].get<std::string>();
  c.assets_dir = resolve(base, j.at("assets").get<std::string>());

  const auto retrieval = j.value("retrieval", Json::object());
  c.chunk_size = retrieval.value("chunk_size", kDefaultChunkSize);
  c.chunk_overlap = retrieval.value("overlap", kDefaultChunkOverlap);
  c.embedding = retrieval.value("embedding", Json{{"provider", "local-hash"}});

  for (const auto& [name, e] : j.at("endpoints").items()) c.endpoints.emplace(name, endpoint_from_json(name, e));

  const auto& profiles = j.at("profiles");
  if (profiles.is_string()) {
    const auto path = resolve(base, profiles.get<std::string>());
    c.profiles_json = Json::parse(read_file(path));
    c.profiles_base = path.parent_path();
  } else {
    c.profiles_json = profiles;
    c.profiles_base = base;
  }

  const auto selection = selection_from_json(j.value("feature_selection", Json::object()));
  std::map<std::string, PermutationRules> rules;
  const auto named_rules = j.value("permutation_rules", Json::object());
  for (const auto& [name, r] : named_rules.items()) rules[name] = rules_from_json(r);
  for (const auto& s : j.at("stages")) c.stages.push_back(stage_from_json(s, selection, rules));

  const auto gen = j.value("generation", Json::object());
  c.parallelism = gen.value("parallelism", 1);
  c.retry.max_attempts = gen.value("max_attempts", 3);
  c.retry.backoff_unit = std::chrono::milliseconds(gen.value("backoff_ms", 2000));
  if (gen.contains("replay")) c.replay = resolve(base, gen["replay"].get<std::string>());
  if (gen.contains("record")) c.record = resolve(base, gen["record"].get<std::string>());

  const auto eval = j.value("evaluation", Json::object());
  c.run_policy.timeout_s = eval.value("timeout_s", 60);
  c.run_policy.compile_timeout_s = eval.value("compile_timeout_s", 300);
  c.eval_workers = eval.value("workers", 1);
  if (j.contains("annotations")) c.annotations = resolve(base, j["annotations"].get<std::string>());
  c.out_dir = resolve(base, j.value("out", "runs/" + c.name));
  return c;
}

ValidationReport validate_config(const fs::path& plan_path) {
  ValidationReport report;
  std::set<std::string> seen;
  const auto diag = [&](ErrorCode code, const std::string& msg) {
    if (seen.insert(std::string(to_string(code)) + msg).second) report.diagnostics.push_back({code, msg});
  };

  PipelineConfig c;
  try {
    c = load_plan(plan_path);
  } catch (const Error& e) {
    diag(e.code(), e.detail());
    return report;
  } catch (const std::exception& e) {
    diag(ErrorCode::InvalidConfig, e.what());
    return report;
  }

  if (!fs::exists(c.spec_path)) {
    diag(ErrorCode::MissingAsset, "specification " + c.spec_path.string());
  } else {
    try {
      report.arithmetic = plan_arithmetic(c.stages, load_spec_index(c.spec_path, c.heading));
    } catch (const Error& e) {
      diag(e.code(), e.detail());
    }
  }

  if (c.replay && !fs::exists(*c.replay)) diag(ErrorCode::MissingAsset, "replay fixtures " + c.replay->string());
  std::set<std::string> llms;
  for (const auto& s : c.stages) llms.insert(s.llms.begin(), s.llms.end());
  for (const auto& llm : llms) {
    auto it = c.endpoints.find(llm);
    if (it == c.endpoints.end()) {
      diag(ErrorCode::InvalidConfig, "no endpoint named '" + llm + "'");
      continue;
    }
    const auto& e = it->second;
    if (!c.replay && e.is_remote() && !e.auth_env_var.empty()) {
      const char* token = std::getenv(e.auth_env_var.c_str());
      if (token == nullptr || *token == '\0') diag(ErrorCode::AuthMissing, llm + ": $" + e.auth_env_var + " is not set");
    }
    if (!c.replay && !e.is_remote()) diag(ErrorCode::InvalidConfig, llm + ": no base_url and no replay fixtures");
  }

  const auto assets = load_assets(c.assets_dir);
  for (const auto& s : c.stages) {
    for (auto lang : s.languages) {
      const std::string name(to_string(lang));
      if (std::any_of(s.methods.begin(), s.methods.end(), needs_template) && !assets.templates.count(lang)) {
        diag(ErrorCode::MissingAsset, name + " template (" + (c.assets_dir / "templates" / name).string() + ")");
      }
      if (std::any_of(s.methods.begin(), s.methods.end(), uses_oneshot) && !assets.oneshot.count(lang)) {
        diag(ErrorCode::MissingAsset, name + " one-shot example (" + (c.assets_dir / "oneshot" / name).string() + ")");
      }
    }
  }

  std::map<std::string, ProfileSet> profiles;
  try {
    profiles = profiles_from_json(c.profiles_json, c.profiles_base);
  } catch (const Error& e) {
    diag(e.code(), e.detail());
  } catch (const std::exception& e) {
    diag(ErrorCode::InvalidConfig, std::string("profiles: ") + e.what());
  }
  for (const auto& s : c.stages) {
    auto it = profiles.find(s.compiler_profile);
    if (it == profiles.end()) {
      diag(ErrorCode::InvalidConfig, s.name + ": unknown compiler profile '" + s.compiler_profile + "'");
      continue;
    }
    for (auto lang : s.languages) {
      auto p = it->second.by_language.find(lang);
      if (p == it->second.by_language.end()) {
        diag(ErrorCode::MissingAsset, "profile '" + s.compiler_profile + "' has no " + std::string(to_string(lang)) +
                                          " compiler");
        continue;
      }
      const auto argv = split_command(p->second.compile_command);
      if (argv.empty() || !resolve_executable(argv.front())) {
        diag(ErrorCode::CompilerNotFound,
             "profile '" + s.compiler_profile + "': " + (argv.empty() ? std::string("<empty>") : argv.front()));
      }
    }
  }
  return report;
}

Json to_json(const RunManifest& m) {
  return {{"plan_name", m.plan_name},
          {"suites", m.suites},
          {"prompts", m.prompts},
          {"artifacts", m.artifacts},
          {"executed", m.executed},
          {"skipped", m.skipped},
          {"generation_failures", m.generation_failures},
          {"started", m.started},
          {"finished", m.finished},
          {"status", m.status},
          {"error", m.error}};
}

namespace {

class StepRunner {
 public:
  StepRunner(const fs::path& out, const RunOptions& options, RunManifest& manifest)
      : out_(out), options_(options), manifest_(manifest) {}

  void persist() const { write_file(out_ / "manifest.json", to_json(manifest_).dump(2) + "\n"); }

  /// Runs `body` into the step directory unless a completed one exists and resume is on.
  fs::path run(const std::string& step, const std::string& digest, const std::function<void(const fs::path&)>& body) {
    const auto dir = out_ / (step + "-" + digest.substr(0, 12));
    manifest_.artifacts[step] = dir.string();
    if (options_.resume && fs::exists(dir / "DONE")) {
      manifest_.skipped.push_back(step);
      say("skip " + step + " (" + dir.filename().string() + ")");
      persist();
      return dir;
    }
    say("run " + step);
    fs::remove_all(dir);
    fs::create_directories(dir);
    body(dir);
    write_file(dir / "DONE", digest + "\n");
    manifest_.executed.push_back(step);
    persist();
    return dir;
  }

  void say(const std::string& msg) const {
    if (options_.log) options_.log(msg);
  }

 private:
  fs::path out_;
  const RunOptions& options_;
  RunManifest& manifest_;
};

std::vector<PromptRecord> read_prompts(const fs::path& path) {
  std::vector<PromptRecord> out;
  for (const auto& row : read_jsonl(path)) out.push_back(prompt_from_json(row));
  return out;
}

}  // namespace

RunManifest run_pipeline(const PipelineConfig& c, const RunOptions& options) {
  RunManifest m;
  m.plan_name = c.name;
  m.started = utc_now();
  m.status = "running";
  fs::create_directories(c.out_dir);
  StepRunner steps(c.out_dir, options, m);
  steps.persist();

  try {
    const auto spec_bytes = read_file(c.spec_path);
    const auto d_ingest = digest_of({"ingest", sha256_hex(spec_bytes), c.heading.regex});
    const auto ingest_dir = steps.run("ingest", d_ingest, [&](const fs::path& dir) {
      const auto index = load_spec_index(c.spec_path, c.heading);
      write_file(dir / "spec.json", export_spec_json(index));
      write_file(toc_companion_path(dir / "spec.json"), export_toc_json(index));
    });
    const auto index = load_spec_index(ingest_dir / "spec.json");
    const auto arithmetic = plan_arithmetic(c.stages, index);
    m.suites = arithmetic.suites.size();
    m.prompts = arithmetic.total_prompts;
    steps.persist();

    const auto provider = make_embedding_provider(c.embedding);
    const auto d_db = digest_of({"build-db", d_ingest, c.embedding.dump(), std::to_string(c.chunk_size),
                                 std::to_string(c.chunk_overlap)});
    const auto db_dir = steps.run("build-db", d_db, [&](const fs::path& dir) {
      // Chunk the same bytes the index was sliced from so spans line up.
      const auto first = spec_bytes.find_first_not_of(" \t\r\n");
      const bool json = c.spec_path.extension() == ".json" || (first != std::string::npos && spec_bytes[first] == '{');
      std::string text = spec_bytes;
      if (json) {
        text.clear();
        for (const auto& s : index.sections()) text += s.body + "\n\n";
      }
      save_store(build_store(text, *provider, c.chunk_size, c.chunk_overlap), dir);
    });

    // Compiler profiles only matter from evaluate on.
    Json stages = Json::array();
    Json stage_profiles = Json::object();
    for (const auto& s : c.stages) {
      auto sj = stage_json(s);
      sj.erase("compiler_profile");
      stages.push_back(std::move(sj));
      stage_profiles[s.name] = s.compiler_profile;
    }
    const auto d_prompts = digest_of({"gen-prompts", d_db, tree_digest(c.assets_dir), stages.dump()});
    const auto prompts_dir = steps.run("gen-prompts", d_prompts, [&](const fs::path& dir) {
      const auto store = load_store(db_dir);
      const auto prompts = build_prompt_suite(c.stages, index, store, load_assets(c.assets_dir), *provider);
      std::vector<Json> rows;
      for (const auto& p : prompts) rows.push_back(to_json(p));
      write_jsonl(dir / "prompts.jsonl", rows);
    });
    const auto prompts = read_prompts(prompts_dir / "prompts.jsonl");

    Json endpoints = Json::object();
    for (const auto& [name, e] : c.endpoints) {
      endpoints[name] = {{"base_url", e.base_url},
                         {"model", e.model_name},
                         {"temperature", e.temperature},
                         {"max_output_tokens", e.max_output_tokens}};
    }
    const std::string replay_digest = c.replay ? sha256_hex(read_file(*c.replay)) : std::string("live");
    const auto d_gen = digest_of({"generate", d_prompts, endpoints.dump(), replay_digest});
    const auto gen_dir = steps.run("generate", d_gen, [&](const fs::path& dir) {
      std::unique_ptr<ChatBackend> owned;
      const ChatBackend* backend = options.backend;
      if (backend == nullptr) {
        if (c.replay) {
          owned = std::make_unique<ReplayBackend>(FixtureStore::load(*c.replay));
        } else {
          owned = std::make_unique<HttpChatBackend>();
        }
        backend = owned.get();
      }
      std::map<std::string, std::vector<std::size_t>> by_llm;
      for (std::size_t i = 0; i < prompts.size(); ++i) by_llm[prompts[i].llm].push_back(i);
      std::vector<GenerationRecord> all(prompts.size());
      for (const auto& [llm, idx] : by_llm) {
        auto it = c.endpoints.find(llm);
        if (it == c.endpoints.end()) throw Error(ErrorCode::InvalidConfig, "no endpoint named '" + llm + "'");
        Gateway gw{it->second, backend, c.retry, {}, !c.replay && options.backend == nullptr};
        gw.log = [&](const std::string& id, int attempt, const std::string& what) {
          steps.say(llm + " " + id + " attempt " + std::to_string(attempt) + ": " + what);
        };
        std::vector<PromptRecord> subset;
        for (auto i : idx) subset.push_back(prompts[i]);
        auto records = batch_generate(subset, gw, c.parallelism);
        for (std::size_t k = 0; k < idx.size(); ++k) all[idx[k]] = std::move(records[k]);
      }
      std::vector<Json> rows;
      for (const auto& g : all) rows.push_back(to_json(g));
      write_jsonl(dir / "generations.jsonl", rows);
      if (c.record) record_fixtures(all, prompts).save(*c.record);
    });
    std::vector<GenerationRecord> generations;
    for (const auto& row : read_jsonl(gen_dir / "generations.jsonl")) generations.push_back(generation_from_json(row));
    m.generation_failures = static_cast<std::size_t>(std::count_if(
        generations.begin(), generations.end(), [](const auto& g) { return g.finish_reason == FinishReason::Error; }));

    const auto d_extract = digest_of({"extract", d_gen});
    const auto tests_dir = steps.run("extract", d_extract, [&](const fs::path& dir) {
      write_extracted(extract_suite(generations, prompts), dir / "tests");
    });

    const auto profiles = profiles_from_json(c.profiles_json, c.profiles_base);
    const auto d_eval = digest_of({"evaluate", d_extract, profiles_digest(profiles), stage_profiles.dump(),
                                   std::to_string(c.run_policy.timeout_s),
                                   std::to_string(c.run_policy.compile_timeout_s)});
    const auto eval_dir = steps.run("evaluate", d_eval, [&](const fs::path& dir) {
      const auto tests = read_extracted(tests_dir / "tests");
      std::unordered_map<std::string, std::string> stage_of;
      for (const auto& p : prompts) stage_of[p.id] = p.stage;
      std::vector<EvalRecord> records(tests.size());
      for (const auto& s : c.stages) {
        std::vector<std::size_t> idx;
        std::vector<ExtractionOutcome> subset;
        for (std::size_t i = 0; i < tests.size(); ++i) {
          if (stage_of[outcome_prompt_id(tests[i])] == s.name) {
            idx.push_back(i);
            subset.push_back(tests[i]);
          }
        }
        if (subset.empty()) continue;
        auto it = profiles.find(s.compiler_profile);
        if (it == profiles.end()) {
          throw Error(ErrorCode::InvalidConfig, s.name + ": unknown compiler profile '" + s.compiler_profile + "'");
        }
        auto out = evaluate_suite(subset, it->second, c.run_policy, c.eval_workers);
        for (std::size_t k = 0; k < idx.size(); ++k) records[idx[k]] = std::move(out[k]);
      }
      write_results(records, dir / "results.jsonl");
      write_file(dir / "results.csv", results_csv(records));
    });

    const std::string annotations_digest =
        c.annotations && fs::exists(*c.annotations) ? sha256_hex(read_file(*c.annotations)) : std::string("none");
    const auto d_report = digest_of({"report", d_eval, annotations_digest});
    steps.run("report", d_report, [&](const fs::path& dir) {
      std::vector<EvalRecord> records;
      for (const auto& row : read_jsonl(eval_dir / "results.jsonl")) records.push_back(eval_from_json(row));
      const auto meta = meta_from_prompts(prompts);
      std::optional<AnalysisSummary> summary;
      if (c.annotations && fs::exists(*c.annotations)) summary = summarize_annotations(read_annotations(*c.annotations));
      std::unordered_map<std::string, std::string> stage_of;
      for (const auto& p : prompts) stage_of[p.id] = p.stage;
      for (const auto& s : c.stages) {
        std::vector<EvalRecord> subset;
        for (const auto& r : records) {
          if (stage_of[r.prompt_id] == s.name) subset.push_back(r);
        }
        const auto reports = tabulate(subset, meta);
        const auto langs = language_breakdown(subset, meta);
        write_file(dir / (s.name + ".md"), render_report(reports, langs, summary, ReportFormat::Markdown));
        write_file(dir / (s.name + ".csv"), render_report(reports, langs, summary, ReportFormat::Csv));
      }
    });

    m.status = "complete";
    m.finished = utc_now();
    steps.persist();
  } catch (const std::exception& e) {
    m.status = "failed";
    m.error = e.what();
    m.finished = utc_now();
    steps.persist();
    throw;
  }
  return m;
}

}  // namespace vvgen
