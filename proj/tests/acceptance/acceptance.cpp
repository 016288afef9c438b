#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "vvgen/analytics.hpp"
#include "vvgen/common.hpp"
#include "vvgen/error.hpp"
#include "vvgen/extractor.hpp"
#include "vvgen/finetune_dataset.hpp"
#include "vvgen/harness.hpp"
#include "vvgen/pipeline.hpp"
#include "vvgen/prompt_forge.hpp"
#include "vvgen/retrieval.hpp"

using namespace vvgen;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = VVGEN_SOURCE_DIR;

// Collects the first few mismatches for a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (notes_.size() < 5) notes_.push_back(what);
  }
  template <typename A, typename B>
  void equal(const A& a, const B& b, const std::string& what) {
    if (a == b) return;
    std::ostringstream os;
    os << what << " (got " << a << ", want " << b << ")";
    expect(false, os.str());
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::string out = std::to_string(failures_) + " mismatch(es)";
    for (const auto& n : notes_) out += "; " + n;
    return out;
  }

 private:
  int failures_ = 0;
  std::vector<std::string> notes_;
};

struct Criterion {
  int number;
  std::string title;
  double budget_s;  // 0 means no runtime bound
  std::function<void(Check&)> body;
};

constexpr const char* kExpressive = "ExpressiveTemplateRag";

void analytics_regression(Check& c) {
  std::vector<EvalRecord> records;
  MetaMap meta;
  for (const auto& row : fixtures::stage2_rows()) {
    fixtures::add_records(records, meta, row.llm, kExpressive, Language::C, row.counts);
  }
  const std::map<std::string, int> want{{"Phind-Codellama-34b-v2", 34},      {"Codellama-34b-Instruct", 13},
                                        {"Deepseek-Coder-33b-Instruct", 48}, {"GPT-4-Turbo", 40},
                                        {"Finetuned GPT-3.5-Turbo", 24},     {"Finetuned Phind", 26},
                                        {"Finetuned Deepseek", 46}};
  const auto reports = tabulate(records, meta);
  c.equal(reports.size(), want.size(), "suite count");
  for (const auto& r : reports) {
    std::size_t sum = 0;
    for (auto n : r.counts) sum += n;
    c.equal(sum, std::size_t{351}, r.llm + " row sum");
    c.equal(r.total, std::size_t{351}, r.llm + " total");
    const auto it = want.find(r.llm);
    c.expect(it != want.end(), "unexpected row " + r.llm);
    if (it != want.end()) c.equal(r.pass_display(), it->second, r.llm + " pass %");
    if (r.llm == "Deepseek-Coder-33b-Instruct") c.equal(r.count(EvalOutcome::Pass), std::size_t{170}, "Deepseek passes");
  }
}

void language_regression(Check& c) {
  std::vector<EvalRecord> records;
  MetaMap meta;
  const std::array langs{Language::C, Language::Cpp, Language::Fortran};
  const std::map<std::string, std::pair<std::array<std::size_t, 3>, std::array<int, 3>>> rows{
      {"Deepseek-Coder-33b-Instruct", {{60, 55, 55}, {51, 47, 47}}},
      {"Codellama-34b-Instruct", {{18, 24, 5}, {15, 21, 4}}}};
  for (const auto& [llm, row] : rows) {
    for (std::size_t i = 0; i < 3; ++i) {
      fixtures::add_records(records, meta, llm, kExpressive, langs[i], {0, 117 - row.first[i], 0, row.first[i]});
    }
  }
  const auto breakdown = language_breakdown(records, meta);
  c.equal(breakdown.size(), rows.size(), "breakdown rows");
  for (const auto& b : breakdown) {
    const auto& want = rows.at(b.llm).second;
    for (std::size_t i = 0; i < 3; ++i) {
      c.equal(b.per_language.at(langs[i]).display(), want[i], b.llm + " " + std::string(to_string(langs[i])));
    }
  }
}

void annotation_summary(Check& c) {
  const auto s = summarize_annotations(fixtures::deepseek_annotations());
  c.equal(s.n_pass, std::size_t{25}, "passing sample");
  c.equal(s.n_fail, std::size_t{25}, "failing sample");
  c.equal(s.true_pass_pct, 76.0, "true pass %");
  c.expect(std::abs(s.base_lang_error_pct - 47.0) <= 4.0, "base language error % within 4 of 47");
  c.equal(s.base_lang_error_pct, 48.0, "base language error % (12/25)");
  c.equal(s.openacc_error_pct, 76.0, "OpenACC error %");
}

// Window count from first principles: one window per step until one reaches the end.
std::size_t expected_windows(std::size_t n, std::size_t size, std::size_t overlap) {
  std::size_t count = 0;
  for (std::size_t start = 0;; start += size - overlap) {
    ++count;
    if (start + size >= n) return count;
  }
}

void chunker_properties(Check& c) {
  const std::string flat(2500, 'x');
  const auto fixed = chunk_text(flat, 1000, 100);
  c.equal(fixed.size(), std::size_t{3}, "2500/1000/100 chunk count");
  if (fixed.size() == 3) {
    c.equal(fixed[0].span.start, std::size_t{0}, "start 0");
    c.equal(fixed[1].span.start, std::size_t{900}, "start 1");
    c.equal(fixed[2].span.start, std::size_t{1800}, "start 2");
  }

  std::mt19937 rng(2024);
  const std::string alphabet = "abcdefghij klmnop\nqrstuvwxyz 0123456789";
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 5000;
    const std::size_t size = 1 + rng() % 1200;
    const std::size_t overlap = rng() % size;
    std::string text(n, ' ');
    for (auto& ch : text) ch = alphabet[rng() % alphabet.size()];
    const auto chunks = chunk_text(text, size, overlap);
    const auto tag = "trial " + std::to_string(trial);
    c.equal(chunks.size(), expected_windows(n, size, overlap), tag + " count");
    if (chunks.empty()) continue;
    c.equal(chunks.front().span.start, std::size_t{0}, tag + " first start");
    c.equal(chunks.back().span.end, n, tag + " last end");
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& ch = chunks[i];
      c.expect(ch.text == text.substr(ch.span.start, ch.span.end - ch.span.start), tag + " text matches span");
      c.expect(ch.text.size() <= size, tag + " size bound");
      if (i + 1 < chunks.size()) {
        c.equal(chunks[i + 1].span.start - ch.span.start, size - overlap, tag + " step");
        c.equal(ch.span.end - chunks[i + 1].span.start, overlap, tag + " overlap");
      }
    }
  }
}

long double oracle_cosine(const Embedding& a, const Embedding& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += static_cast<long double>(a.values[i]) * b.values[i];
    na += static_cast<long double>(a.values[i]) * a.values[i];
    nb += static_cast<long double>(b.values[i]) * b.values[i];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / std::sqrt(na * nb);
}

void retrieval_oracle(Check& c) {
  std::mt19937 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dims = 4 + rng() % 60;
    const std::size_t n = 1 + rng() % 1000;
    VectorStore store("random");
    std::vector<std::pair<int, Embedding>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      Embedding v;
      if (!rows.empty() && rng() % 20 == 0) {
        v = rows[rng() % rows.size()].second;  // exact duplicate exercises the id tie-break
      } else {
        v.values.resize(dims);
        for (auto& x : v.values) x = gauss(rng);
      }
      const int id = static_cast<int>(i) * 3 + 1;
      store.add({id, v, {}, "chunk " + std::to_string(id)});
      rows.emplace_back(id, v);
    }
    Embedding q;
    q.values.resize(dims);
    for (auto& x : q.values) x = gauss(rng);
    const std::size_t k = 1 + rng() % (n + 5);

    std::vector<std::pair<long double, int>> oracle;
    for (const auto& [id, v] : rows) oracle.emplace_back(oracle_cosine(q, v), id);
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    oracle.resize(std::min(k, oracle.size()));

    const auto got = similarity_search(store, q, k);
    const auto tag = "store " + std::to_string(trial);
    c.equal(got.size(), oracle.size(), tag + " result count");
    for (std::size_t i = 0; i < std::min(got.size(), oracle.size()); ++i) {
      c.expect(std::abs(static_cast<long double>(got[i].score) - oracle[i].first) <= 1e-12L, tag + " score");
      const bool near_tie = (i > 0 && std::abs(oracle[i].first - oracle[i - 1].first) <= 1e-12L) ||
                            (i + 1 < oracle.size() && std::abs(oracle[i].first - oracle[i + 1].first) <= 1e-12L);
      if (!near_tie) c.equal(got[i].chunk_id, oracle[i].second, tag + " order");
    }
  }

  LocalHashEmbedder e;
  const auto store = build_store(fixtures::sample_spec_text(), e, 120, 20);
  for (const auto& entry : store.entries()) {
    const auto r = similarity_search(store, entry.vector, 1);
    c.expect(!r.empty() && r[0].chunk_id == entry.chunk_id, "self query rank 1 for chunk " + std::to_string(entry.chunk_id));
    if (!r.empty()) c.expect(std::abs(r[0].score - 1.0) <= 1e-9, "self query score for chunk " + std::to_string(entry.chunk_id));
  }
}

void extraction_truth_table(Check& c) {
  const auto corpus = fixtures::extraction_corpus();
  c.expect(corpus.size() >= 12, "corpus has at least 12 items");
  for (const auto& item : corpus) {
    const auto out = extract_code(item.raw, item.language);
    if (!item.mode) {
      c.expect(!extracted(out), item.name + " should be a parsing failure");
      continue;
    }
    if (!extracted(out)) {
      c.expect(false, item.name + " should extract");
      continue;
    }
    const auto& t = std::get<ExtractedTest>(out);
    c.expect(t.mode == *item.mode, item.name + " mode");
    c.expect(t.code.size() >= item.ends_with.size() &&
                 t.code.compare(t.code.size() - item.ends_with.size(), item.ends_with.size(), item.ends_with) == 0,
             item.name + " ending");
  }

  const ExtractionOutcome parse_fail = ParsingFailure{"x", "r"};
  const ExtractionOutcome ok = fixtures::c_test("x", "int main(){return 0;}");
  CompileResult cfail;
  CompileResult cok;
  cok.ok = true;
  RunResult rpass;
  rpass.exit_code = 0;
  RunResult rfail;
  rfail.exit_code = 2;
  RunResult rsig;
  rsig.term_signal = 9;
  RunResult rtimeout = rpass;
  rtimeout.timed_out = true;
  const std::vector<std::optional<CompileResult>> compiles{std::nullopt, cfail, cok};
  const std::vector<std::optional<RunResult>> runs{std::nullopt, rpass, rfail, rsig, rtimeout};
  int consistent = 0;
  for (const auto& e : {parse_fail, ok}) {
    for (const auto& cr : compiles) {
      for (const auto& rr : runs) {
        std::optional<EvalOutcome> want;
        if (!extracted(e)) {
          if (!cr && !rr) want = EvalOutcome::ParsingError;
        } else if (cr && !cr->ok) {
          if (!rr) want = EvalOutcome::CompileError;
        } else if (cr && rr) {
          want = rr->exit_code == 0 && !rr->timed_out && !rr->term_signal ? EvalOutcome::Pass : EvalOutcome::RuntimeFail;
        }
        std::optional<EvalOutcome> got;
        try {
          got = classify(e, cr, rr);
        } catch (const Error&) {
        }
        c.expect(got == want, "classify combination " + std::to_string(consistent));
        if (want) ++consistent;
      }
    }
  }
  c.equal(consistent, 6, "consistent stage shapes");
}

void harness_end_to_end(Check& c) {
  RunPolicy policy;
  policy.timeout_s = 2;
  const auto suite = fixtures::six_program_suite();
  std::vector<std::string> csv;
  for (int workers : {1, 8}) {
    const auto records = evaluate_suite(suite, fixtures::host_profiles(), policy, workers);
    std::map<EvalOutcome, int> counts;
    int timeouts = 0;
    for (const auto& r : records) {
      c.expect(r.outcome.has_value(), r.prompt_id + " infra error: " + r.infra_error);
      if (r.outcome) ++counts[*r.outcome];
      if (r.timed_out) ++timeouts;
    }
    const auto tag = "workers " + std::to_string(workers);
    c.equal(counts[EvalOutcome::ParsingError], 1, tag + " parse");
    c.equal(counts[EvalOutcome::CompileError], 2, tag + " compile");
    c.equal(counts[EvalOutcome::RuntimeFail], 2, tag + " runtime");
    c.equal(counts[EvalOutcome::Pass], 1, tag + " pass");
    c.equal(timeouts, 1, tag + " timeouts");
    csv.push_back(results_csv(records));
  }
  c.expect(csv[0] == csv[1], "same results for 1 and 8 workers");
}

void plan_arithmetic_check(Check& c) {
  const auto report = validate_config(kRoot / "configs/two_stage_plan.json");
  c.expect(report.arithmetic.has_value(), "arithmetic computed");
  if (!report.arithmetic) return;
  c.equal(report.arithmetic->suites.size(), std::size_t{35}, "suites");
  c.equal(report.arithmetic->total_prompts, std::size_t{5117}, "prompts");
}

void write_synthetic_suite(const fs::path& dir, std::size_t per_language) {
  const std::array<std::string, 5> hints{"parallel", "serial", "kernels", "num-gangs", "num_workers"};
  for (std::size_t i = 0; i < per_language; ++i) {
    const auto& h = hints[i % hints.size()];
    const auto n = std::to_string(i);
    write_file(dir / "C" / ("t" + n + ".c"),
               "// T1:" + h + ",V:2.7-3.3\nint main(){\n    int err = " + n + " % 1;\n    return err;\n}\n");
    write_file(dir / "CPP" / ("t" + n + ".cpp"),
               "// T1:" + h + ",V:2.7-3.3\n#include <cstdio>\nint main(){\n    std::printf(\"" + n + "\\n\");\n}\n");
    write_file(dir / "F" / ("t" + n + ".F90"),
               "!T1:" + h + ",V:2.7-3.3\nprogram t" + n + "\n  print *, \"" + n + "\"\nend program t" + n + "\n");
  }
}

void finetune_emitter(Check& c) {
  const auto text = fixtures::sample_spec_text();
  const auto index = slice_sections(text, parse_toc(text));
  LocalHashEmbedder e;
  const auto store = build_store(text, e, 150, 30);

  fixtures::TempDir small;
  write_synthetic_suite(small.path(), 10);
  const auto ds = build_dataset(small.path(), index, store, e);
  c.equal(ds.examples.size(), std::size_t{30}, "examples");
  for (auto lang : {Language::C, Language::Cpp, Language::Fortran}) {
    c.equal(ds.manifest.per_language.count(lang) ? ds.manifest.per_language.at(lang) : 0, std::size_t{10},
            std::string(to_string(lang)) + " examples");
  }
  const auto jsonl = to_jsonl(ds.examples);
  std::istringstream lines(jsonl);
  std::size_t count = 0;
  for (std::string line; std::getline(lines, line); ++count) {
    c.expect(line.rfind("{\"prompt\":", 0) == 0, "line " + std::to_string(count) + " starts with prompt");
    c.expect(line.find(",\"completion\":") != std::string::npos, "line " + std::to_string(count) + " has completion");
  }
  c.equal(count, std::size_t{30}, "JSON lines");
  c.expect(parse_jsonl(jsonl) == ds.examples, "round trip");

  fixtures::TempDir large;
  write_synthetic_suite(large.path(), 445);
  const auto big = build_dataset(large.path(), index, store, e);
  c.equal(big.manifest.total, std::size_t{1335}, "scaled manifest total");
  c.equal(big.examples.size(), std::size_t{1335}, "scaled examples");
}

std::map<std::string, std::string> step_files(const RunManifest& m, const std::string& step, const std::string& sub) {
  auto files = fixtures::snapshot(fs::path(m.artifacts.at(step)) / sub);
  files.erase("DONE");
  return files;
}

void replay_determinism(Check& c) {
  fixtures::MockServer server([](const httplib::Request& req, httplib::Response& res) {
    res.set_content(fixtures::scripted_chat_response(req.body).dump(), "application/json");
  });
  fixtures::TempDir live_dir;
  auto live = fixtures::tiny_plan_json(server.url("/v1/chat/completions"));
  live["generation"]["record"] = "fixtures.json";
  const auto recorded = run_pipeline(load_plan(fixtures::write_tiny_plan(live_dir.path(), live)), {});
  const int live_calls = server.calls();
  c.equal(live_calls, 10, "live calls");

  std::vector<RunManifest> replays;
  std::vector<std::unique_ptr<fixtures::TempDir>> dirs;
  for (int i = 0; i < 2; ++i) {
    dirs.push_back(std::make_unique<fixtures::TempDir>());
    auto replay = fixtures::tiny_plan_json("https://models.invalid/v1/chat/completions");
    replay["generation"]["replay"] = (live_dir / "fixtures.json").string();
    replays.push_back(run_pipeline(load_plan(fixtures::write_tiny_plan(dirs.back()->path(), replay)), {}));
  }
  c.equal(server.calls(), live_calls, "replay contacted the endpoint");

  const auto tests_live = step_files(recorded, "extract", "tests");
  c.expect(!tests_live.empty(), "extracted tests present");
  for (const auto& r : replays) {
    c.expect(step_files(r, "gen-prompts", "") == step_files(recorded, "gen-prompts", ""), "prompts identical");
    c.expect(step_files(r, "extract", "tests") == tests_live, "extracted tests identical");
    c.expect(step_files(r, "report", "") == step_files(recorded, "report", ""), "reports identical");
  }
  c.expect(step_files(replays[0], "report", "") == step_files(replays[1], "report", ""), "replays agree");
}

void expressive_golden(Check& c) {
  AssetLibrary assets;
  assets.templates[Language::C] = "#include \"acc_testsuite.h\"\nint main(){\n    return 0;\n}\n";
  const FeatureSpec f{"compute construct num_gangs clause", "2.5.10", Language::C, std::nullopt};
  const RetrievedContext ctx{"The num_gangs clause is allowed on the parallel and kernels constructs.", {"chunk:4"},
                             false};
  const auto r = render_prompt(PromptMethod::ExpressiveTemplateRag, f, assets, ctx);
  c.expect(r.text == read_file(kRoot / "tests/golden/expressive_prompt_c.txt"), "byte-for-byte golden match");
  c.expect(r.text.rfind("Write a code in C to verify compiler implementation of the OpenACC specification of", 0) == 0,
           "opening sentence");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "stage-two table rows and pass percentages", 1, analytics_regression},
      {2, "per-language pass percentages", 0, language_regression},
      {3, "annotation summary", 1, annotation_summary},
      {4, "chunker properties", 5, chunker_properties},
      {5, "similarity search matches brute-force cosine", 10, retrieval_oracle},
      {6, "extraction and classification truth table", 0, extraction_truth_table},
      {7, "host-compiler harness with six programs", 60, harness_end_to_end},
      {8, "shipped plan arithmetic", 0, plan_arithmetic_check},
      {9, "fine-tune JSONL emitter", 5, finetune_emitter},
      {10, "record then replay is byte-identical", 0, replay_determinism},
      {11, "expressive prompt golden", 0, expressive_golden},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget_s > 0) check.expect(secs < cr.budget_s, "over runtime budget of " + std::to_string(cr.budget_s) + " s");
    const bool ok = check.ok();
    if (!ok) ++failed;
    std::printf("%s criterion %d: %s (%.2f s)%s\n", ok ? "PASS" : "FAIL", cr.number, cr.title.c_str(), secs,
                ok ? "" : (": " + check.summary()).c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
