#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "vvgen/analytics.hpp"
#include "vvgen/extractor.hpp"
#include "vvgen/finetune_dataset.hpp"
#include "vvgen/harness.hpp"
#include "vvgen/llm_gateway.hpp"
#include "vvgen/pipeline.hpp"
#include "vvgen/process.hpp"
#include "vvgen/prompt_forge.hpp"
#include "vvgen/retrieval.hpp"
#include "vvgen/spec_corpus.hpp"

namespace fs = std::filesystem;
using namespace vvgen;

namespace {

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

std::unique_ptr<EmbeddingProvider> provider_from(const std::string& config_path) {
  if (config_path.empty()) return std::make_unique<LocalHashEmbedder>();
  return make_embedding_provider(Json::parse(read_file(config_path)));
}

std::string store_text(const fs::path& spec_path, const SpecIndex& index) {
  const auto bytes = read_file(spec_path);
  const auto first = bytes.find_first_not_of(" \t\r\n");
  if (spec_path.extension() != ".json" && (first == std::string::npos || bytes[first] != '{')) return bytes;
  std::string text;
  for (const auto& s : index.sections()) text += s.body + "\n\n";
  return text;
}

std::vector<PromptRecord> read_prompts(const fs::path& path) {
  std::vector<PromptRecord> out;
  for (const auto& row : read_jsonl(path)) out.push_back(prompt_from_json(row));
  return out;
}

std::vector<EvalRecord> read_results(const fs::path& path) {
  std::vector<EvalRecord> out;
  for (const auto& row : read_jsonl(path)) out.push_back(eval_from_json(row));
  return out;
}

// A profiles file, or a plan whose `profiles` is inline or a path.
std::map<std::string, ProfileSet> load_profiles(const fs::path& path) {
  const auto j = Json::parse(read_file(path));
  const auto base = path.parent_path();
  if (!j.contains("profiles")) return profiles_from_json(j, base);
  if (j["profiles"].is_string()) return load_profiles(base / j["profiles"].get<std::string>());
  return profiles_from_json(j["profiles"], base);
}

bool ask_bool(std::istream& in, const std::string& question) {
  for (std::string line;;) {
    std::cerr << question << " [y/n]: " << std::flush;
    if (!std::getline(in, line)) throw Error(ErrorCode::IoFailure, "input ended");
    const auto a = to_lower(trim(line));
    if (a == "y" || a == "yes") return true;
    if (a == "n" || a == "no") return false;
  }
}

double ask_level(std::istream& in) {
  for (std::string line;;) {
    std::cerr << "correctness [0, 0.25, 0.5, 0.75, 1]: " << std::flush;
    if (!std::getline(in, line)) throw Error(ErrorCode::IoFailure, "input ended");
    try {
      const double v = std::stod(trim(line));
      for (double level : kCorrectnessLevels) {
        if (v == level) return v;
      }
    } catch (const std::exception&) {
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate, evaluate and report on LLM-written OpenACC validation tests"};
  app.require_subcommand(1);

  std::string text, out, heading;
  auto* ingest = app.add_subcommand("ingest-spec", "Slice a specification text into a keyed section index");
  ingest->add_option("--text", text, "Specification text")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "Spec JSON to write")->required();
  ingest->add_option("--heading-pattern", heading, "Heading regex (group 1 key, group 2 title)");
  ingest->callback([&] {
    HeadingPattern pattern;
    if (!heading.empty()) pattern.regex = heading;
    const auto source = read_file(text);
    const auto index = slice_sections(source, parse_toc(source, pattern));
    write_file(out, export_spec_json(index));
    write_file(toc_companion_path(out), export_toc_json(index));
    std::cout << index.size() << " sections -> " << out << '\n';
  });

  std::string spec, db, embedding;
  std::size_t chunk_size = kDefaultChunkSize, overlap = kDefaultChunkOverlap;
  auto* build_db = app.add_subcommand("build-db", "Chunk and embed the specification into a vector store");
  build_db->add_option("--spec", spec, "Specification text or spec JSON")->required()->check(CLI::ExistingFile);
  build_db->add_option("--out", db, "Store directory")->required();
  build_db->add_option("--chunk-size", chunk_size, "Characters per chunk");
  build_db->add_option("--overlap", overlap, "Characters shared by neighbouring chunks");
  build_db->add_option("--embedding", embedding, "Embedding provider config (JSON)");
  build_db->callback([&] {
    const auto index = load_spec_index(spec);
    const auto provider = provider_from(embedding);
    const auto store = build_store(store_text(spec, index), *provider, chunk_size, overlap);
    save_store(store, db);
    std::cout << store.size() << " chunks (" << store.provider_tag() << ") -> " << db << '\n';
  });

  std::string plan, assets;
  auto* gen_prompts = app.add_subcommand("gen-prompts", "Render every prompt of a stage plan");
  gen_prompts->add_option("--plan", plan, "Plan file")->required()->check(CLI::ExistingFile);
  gen_prompts->add_option("--spec", spec, "Overrides the plan's specification");
  gen_prompts->add_option("--db", db, "Vector store directory")->required();
  gen_prompts->add_option("--assets", assets, "Overrides the plan's asset directory");
  gen_prompts->add_option("--out", out, "Prompts JSON-lines")->required();
  gen_prompts->add_option("--embedding", embedding, "Embedding provider config (JSON)");
  gen_prompts->callback([&] {
    auto config = load_plan(plan);
    if (!spec.empty()) config.spec_path = spec;
    if (!assets.empty()) config.assets_dir = assets;
    const auto provider = embedding.empty() ? make_embedding_provider(config.embedding) : provider_from(embedding);
    const auto index = load_spec_index(config.spec_path, config.heading);
    const auto prompts =
        build_prompt_suite(config.stages, index, load_store(db), load_assets(config.assets_dir), *provider);
    std::vector<Json> rows;
    for (const auto& p : prompts) rows.push_back(to_json(p));
    write_jsonl(out, rows);
    std::cout << prompts.size() << " prompts -> " << out << '\n';
  });

  std::string prompts_path, endpoint_name, replay, record;
  int parallelism = 1;
  auto* generate = app.add_subcommand("generate", "Send prompts to an endpoint (or replay recorded answers)");
  generate->add_option("--prompts", prompts_path, "Prompts JSON-lines")->required()->check(CLI::ExistingFile);
  generate->add_option("--endpoint", endpoint_name, "Endpoint name from the plan")->required();
  generate->add_option("--plan", plan, "Plan file holding the endpoints")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", out, "Generations JSON-lines")->required();
  generate->add_option("--replay", replay, "Serve answers from a fixture file")->check(CLI::ExistingFile);
  generate->add_option("--record", record, "Save answers as a fixture file");
  generate->add_option("--parallelism", parallelism, "Concurrent requests")->check(CLI::PositiveNumber);
  generate->callback([&] {
    const auto config = load_plan(plan);
    auto it = config.endpoints.find(endpoint_name);
    if (it == config.endpoints.end()) throw Error(ErrorCode::InvalidConfig, "no endpoint named '" + endpoint_name + "'");
    auto prompts = read_prompts(prompts_path);
    std::vector<PromptRecord> mine;
    for (const auto& p : prompts) {
      if (p.llm == endpoint_name) mine.push_back(p);
    }
    if (!mine.empty()) prompts = std::move(mine);

    std::unique_ptr<ChatBackend> backend;
    if (!replay.empty()) {
      backend = std::make_unique<ReplayBackend>(FixtureStore::load(replay));
    } else {
      backend = std::make_unique<HttpChatBackend>();
    }
    Gateway gw{it->second, backend.get(), config.retry, {}, replay.empty()};
    gw.log = [](const std::string& id, int attempt, const std::string& what) {
      log_line(id + " attempt " + std::to_string(attempt) + ": " + what);
    };
    const auto records = batch_generate(prompts, gw, parallelism);
    std::vector<Json> rows;
    std::size_t failed = 0;
    for (const auto& r : records) {
      rows.push_back(to_json(r));
      if (r.finish_reason == FinishReason::Error) ++failed;
    }
    write_jsonl(out, rows);
    if (!record.empty()) record_fixtures(records, prompts).save(record);
    std::cout << records.size() << " generations (" << failed << " failed) -> " << out << '\n';
  });

  std::string generations_path;
  auto* extract = app.add_subcommand("extract", "Pull test sources out of raw generations");
  extract->add_option("--generations", generations_path, "Generations JSON-lines")
      ->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--prompts", prompts_path, "Prompts JSON-lines")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", out, "Output directory")->required();
  extract->callback([&] {
    std::vector<GenerationRecord> gens;
    for (const auto& row : read_jsonl(generations_path)) gens.push_back(generation_from_json(row));
    const auto outcomes = extract_suite(gens, read_prompts(prompts_path));
    write_extracted(outcomes, out);
    const auto ok = std::count_if(outcomes.begin(), outcomes.end(), extracted);
    std::cout << ok << " extracted, " << outcomes.size() - static_cast<std::size_t>(ok) << " parsing errors -> "
              << out << '\n';
  });

  std::string tests_dir, profile_name, profiles_path, scratch;
  int timeout_s = 60, workers = 1;
  bool keep_dirs = false;
  auto* evaluate = app.add_subcommand("evaluate", "Compile, run and classify extracted tests");
  evaluate->add_option("--tests", tests_dir, "Directory written by extract")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--profile", profile_name, "Compiler profile set")->required();
  evaluate->add_option("--config", profiles_path, "Profiles file or plan")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--timeout", timeout_s, "Seconds per test run")->check(CLI::PositiveNumber);
  evaluate->add_option("--workers", workers, "Tests built and run concurrently")->check(CLI::PositiveNumber);
  evaluate->add_option("--scratch", scratch, "Parent of the per-test directories");
  evaluate->add_flag("--keep-dirs", keep_dirs, "Keep per-test directories");
  evaluate->add_option("--out", out, "Results JSON-lines (a .csv summary is written next to it)")->required();
  evaluate->callback([&] {
    const auto profiles = load_profiles(profiles_path);
    auto it = profiles.find(profile_name);
    if (it == profiles.end()) throw Error(ErrorCode::InvalidConfig, "no profile set '" + profile_name + "'");
    RunPolicy policy;
    policy.timeout_s = timeout_s;
    policy.scratch_root = scratch;
    policy.keep_dirs = keep_dirs;
    const auto records = evaluate_suite(read_extracted(tests_dir), it->second, policy, workers);
    write_results(records, out);
    write_file(fs::path(out).replace_extension(".csv"), results_csv(records));
    std::map<std::string, int> counts;
    for (const auto& r : records) ++counts[r.outcome ? std::string(to_string(*r.outcome)) : "infra_error"];
    for (const auto& [k, v] : counts) std::cout << k << ' ' << v << '\n';
  });

  std::string results_path, meta_path, annotations_path, format = "markdown";
  auto* report = app.add_subcommand("report", "Tabulate results as markdown or CSV");
  report->add_option("--results", results_path, "Results JSON-lines")->required()->check(CLI::ExistingFile);
  report->add_option("--meta", meta_path, "Prompts JSON-lines or prompt metadata JSON")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--annotations", annotations_path, "Annotation ledger")->check(CLI::ExistingFile);
  report->add_option("--format", format, "markdown or csv");
  report->add_option("--out", out, "Report file")->required();
  report->callback([&] {
    const auto records = read_results(results_path);
    const auto meta = load_meta(meta_path);
    std::optional<AnalysisSummary> summary;
    if (!annotations_path.empty()) summary = summarize_annotations(read_annotations(annotations_path));
    write_file(out, render_report(tabulate(records, meta), language_breakdown(records, meta), summary,
                                  parse_report_format(format)));
    std::cout << "report -> " << out << '\n';
  });

  std::string suite_dir, context = "section";
  auto* finetune = app.add_subcommand("build-finetune", "Build a prompt/completion dataset from a manual testsuite");
  finetune->add_option("--suite", suite_dir, "Manual testsuite directory")->required()->check(CLI::ExistingDirectory);
  finetune->add_option("--spec", spec, "Specification text or spec JSON")->required()->check(CLI::ExistingFile);
  finetune->add_option("--db", db, "Vector store directory")->required();
  finetune->add_option("--out", out, "Dataset JSON-lines (manifest written next to it)")->required();
  finetune->add_option("--context", context, "section or chunks")->check(CLI::IsMember({"section", "chunks"}));
  finetune->add_option("--embedding", embedding, "Embedding provider config (JSON)");
  finetune->callback([&] {
    const auto index = load_spec_index(spec);
    const auto provider = provider_from(embedding);
    DatasetOptions options;
    options.context = context == "chunks" ? FinetuneContext::Chunks : FinetuneContext::Section;
    options.warn = [](const fs::path& p, const std::string& why) { log_line("skipped " + p.string() + ": " + why); };
    const auto dataset = build_dataset(suite_dir, index, load_store(db), *provider, options);
    emit_jsonl(dataset.examples, out);
    write_file(fs::path(out).replace_extension(".manifest.json"), to_json(dataset.manifest).dump(2) + "\n");
    std::cout << dataset.manifest.total << " examples -> " << out << '\n';
  });

  std::size_t limit = 0;
  auto* annotate = app.add_subcommand("annotate", "Label evaluated tests by hand (answers read from stdin)");
  annotate->add_option("--results", results_path, "Results JSON-lines")->required()->check(CLI::ExistingFile);
  annotate->add_option("--out", out, "Annotation ledger to append to")->required();
  annotate->add_option("--limit", limit, "Stop after this many new labels");
  annotate->callback([&] {
    std::set<std::string> done;
    if (fs::exists(out)) {
      for (const auto& a : read_annotations(out)) done.insert(a.prompt_id);
    }
    std::size_t added = 0;
    for (const auto& r : read_results(results_path)) {
      if (!r.outcome || done.count(r.prompt_id)) continue;
      if (limit != 0 && added == limit) break;
      AnnotationRecord a;
      a.prompt_id = r.prompt_id;
      a.is_passing_test = *r.outcome == EvalOutcome::Pass;
      std::cerr << "\n" << r.prompt_id << " (" << to_string(*r.outcome) << ")\n";
      if (a.is_passing_test) {
        a.true_pass = ask_bool(std::cin, "tests the intended feature correctly?");
      } else {
        a.base_language_error = ask_bool(std::cin, "base language error?");
        a.openacc_error = ask_bool(std::cin, "OpenACC error?");
      }
      a.correctness = ask_level(std::cin);
      append_annotation(out, a);
      ++added;
    }
    std::cout << added << " annotations appended -> " << out << '\n';
  });

  bool resume = false;
  auto* run = app.add_subcommand("run", "Run every step of a plan");
  run->add_option("--plan", plan, "Plan file")->required()->check(CLI::ExistingFile);
  run->add_flag("--resume", resume, "Skip steps whose outputs are already complete");
  run->callback([&] {
    RunOptions options;
    options.resume = resume;
    options.log = log_line;
    const auto manifest = run_pipeline(load_plan(plan), options);
    std::cout << to_json(manifest).dump(2) << '\n';
  });

  auto* validate = app.add_subcommand("validate", "Check a plan without contacting any endpoint");
  validate->add_option("--plan", plan, "Plan file")->required()->check(CLI::ExistingFile);
  int validate_status = 0;
  validate->callback([&] {
    const auto report = validate_config(plan);
    if (report.arithmetic) {
      std::map<std::string, std::pair<std::size_t, std::size_t>> per_stage;
      for (const auto& s : report.arithmetic->suites) {
        ++per_stage[s.stage].first;
        per_stage[s.stage].second += s.prompts;
      }
      for (const auto& [stage, n] : per_stage) {
        std::cout << stage << ": " << n.first << " suites, " << n.second << " prompts\n";
      }
      std::cout << "total: " << report.arithmetic->suites.size() << " suites, " << report.arithmetic->total_prompts
                << " prompts\n";
    }
    for (const auto& d : report.diagnostics) std::cout << to_string(d.code) << ": " << d.message << '\n';
    if (!report.diagnostics.empty()) validate_status = 2;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return validate_status;
}
