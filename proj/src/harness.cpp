#include "vvgen/harness.hpp"

#include <stdlib.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "vvgen/error.hpp"
#include "vvgen/process.hpp"

namespace vvgen {

namespace {

std::string substitute(std::string token, std::string_view key, std::string_view value) {
  for (auto at = token.find(key); at != std::string::npos; at = token.find(key, at + value.size())) {
    token.replace(at, key.size(), value);
  }
  return token;
}

class ScratchDir {
 public:
  ScratchDir(const std::filesystem::path& root, bool keep) : keep_(keep) {
    const auto base = root.empty() ? std::filesystem::temp_directory_path() : root;
    std::filesystem::create_directories(base);
    std::string tmpl = (base / "vvgen-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw Error(ErrorCode::IoFailure, "mkdtemp under " + base.string());
    }
    path_ = tmpl;
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  ~ScratchDir() {
    if (!keep_) {
      std::error_code ec;
      std::filesystem::remove_all(path_, ec);
    }
  }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  bool keep_;
};

long long ms(std::chrono::milliseconds d) { return d.count(); }

}  // namespace

std::string_view support_header_name(Language lang) noexcept {
  return lang == Language::Fortran ? "acc_testsuite.Fh" : "acc_testsuite.h";
}

void validate_profile(const CompilerProfile& p) {
  if (p.compile_command.find("{src}") == std::string::npos ||
      p.compile_command.find("{out}") == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig,
                "compile command needs {src} and {out}: " + p.compile_command);
  }
  const auto header = std::string(support_header_name(p.language));
  auto it = p.support_headers.find(header);
  if (it == p.support_headers.end() || it->second.empty()) {
    throw Error(ErrorCode::InvalidConfig,
                std::string(to_string(p.language)) + " profile lacks support header " + header);
  }
}

std::map<std::string, ProfileSet> profiles_from_json(const Json& j, const std::filesystem::path& base_dir) {
  std::map<std::string, ProfileSet> out;
  for (const auto& [set_name, langs] : j.items()) {
    ProfileSet set{set_name, {}};
    for (const auto& [lang_name, body] : langs.items()) {
      CompilerProfile p;
      p.language = parse_language(lang_name);
      p.compile_command = body.at("compile_command").get<std::string>();
      if (body.contains("env")) p.env = body["env"].get<std::map<std::string, std::string>>();
      if (body.contains("support_headers")) {
        for (const auto& [file, value] : body["support_headers"].items()) {
          p.support_headers[file] = value.is_string()
                                        ? value.get<std::string>()
                                        : read_file(base_dir / value.at("path").get<std::string>());
        }
      }
      validate_profile(p);
      set.by_language[p.language] = std::move(p);
    }
    out.emplace(set_name, std::move(set));
  }
  return out;
}

CompileResult compile(const ExtractedTest& test, const CompilerProfile& profile,
                      const std::filesystem::path& dir, std::chrono::seconds timeout) {
  if (profile.language != test.language) {
    throw Error(ErrorCode::InconsistentInputs, "profile language " + std::string(to_string(profile.language)) +
                                                   " does not match test language " +
                                                   std::string(to_string(test.language)));
  }
  auto argv = split_command(profile.compile_command);
  if (argv.empty() || !resolve_executable(argv.front())) {
    throw Error(ErrorCode::CompilerNotFound, argv.empty() ? "<empty command>" : argv.front());
  }

  std::filesystem::create_directories(dir);
  const std::string src = "test" + std::string(source_extension(test.language));
  const std::string out = "test.out";
  write_file(dir / src, test.code);
  for (const auto& [name, contents] : profile.support_headers) write_file(dir / name, contents);
  for (auto& a : argv) a = substitute(substitute(std::move(a), "{src}", src), "{out}", out);

  ProcessSpec spec;
  spec.argv = std::move(argv);
  spec.cwd = dir;
  spec.env = profile.env;
  spec.timeout = timeout;
  const auto r = run_process(spec);

  CompileResult result;
  result.compiler_exit = r.exit_code;
  result.elapsed = r.elapsed;
  result.diagnostics = r.err;
  if (!r.out.empty()) result.diagnostics = r.out + result.diagnostics;
  if (r.timed_out) result.diagnostics += "\n[compiler timed out]";
  result.ok = !r.timed_out && r.exit_code == 0 && std::filesystem::exists(dir / out);
  if (result.ok) result.binary = dir / out;
  return result;
}

RunResult execute(const std::filesystem::path& binary, const RunPolicy& policy) {
  if (policy.timeout_s < 1) throw Error(ErrorCode::InvalidParams, "timeout_s must be >= 1");
  ProcessSpec spec;
  spec.argv = {std::filesystem::absolute(binary).string()};
  spec.cwd = binary.parent_path();
  spec.timeout = std::chrono::seconds(policy.timeout_s);
  const auto r = run_process(spec);
  return {r.exit_code, r.term_signal, r.timed_out, r.out, r.err, r.elapsed};
}

std::string_view to_string(EvalOutcome outcome) noexcept {
  switch (outcome) {
    case EvalOutcome::ParsingError: return "parsing_error";
    case EvalOutcome::CompileError: return "compile_error";
    case EvalOutcome::RuntimeFail: return "runtime_fail";
    case EvalOutcome::Pass: return "pass";
  }
  return "?";
}

EvalOutcome parse_outcome(std::string_view name) {
  for (auto o : kAllOutcomes) {
    if (to_string(o) == name) return o;
  }
  throw Error(ErrorCode::InvalidParams, "unknown outcome '" + std::string(name) + "'");
}

EvalOutcome classify(const ExtractionOutcome& extraction, const std::optional<CompileResult>& compiled,
                     const std::optional<RunResult>& run) {
  if (!extracted(extraction)) {
    if (compiled || run) throw Error(ErrorCode::InconsistentInputs, "compile/run given for a parsing error");
    return EvalOutcome::ParsingError;
  }
  if (!compiled) throw Error(ErrorCode::InconsistentInputs, "extracted test without compile result");
  if (!compiled->ok) {
    if (run) throw Error(ErrorCode::InconsistentInputs, "run result for a failed compile");
    return EvalOutcome::CompileError;
  }
  if (!run) throw Error(ErrorCode::InconsistentInputs, "compiled test without run result");
  if (run->timed_out || run->exit_code != 0) return EvalOutcome::RuntimeFail;
  return EvalOutcome::Pass;
}

Json to_json(const EvalRecord& r) {
  Json j = {{"prompt_id", r.prompt_id}};
  j["outcome"] = r.outcome ? Json(to_string(*r.outcome)) : Json(nullptr);
  j["exit_code"] = r.exit_code ? Json(*r.exit_code) : Json(nullptr);
  j["compile_stderr"] = r.compile_stderr;
  j["run_stdout"] = r.run_stdout;
  j["run_stderr"] = r.run_stderr;
  j["compile_ms"] = r.compile_ms;
  j["run_ms"] = r.run_ms;
  j["timed_out"] = r.timed_out;
  if (!r.infra_error.empty()) j["infra_error"] = r.infra_error;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

EvalRecord eval_from_json(const Json& j) {
  EvalRecord r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  if (j.contains("outcome") && !j["outcome"].is_null()) r.outcome = parse_outcome(j["outcome"].get<std::string>());
  if (j.contains("exit_code") && !j["exit_code"].is_null()) r.exit_code = j["exit_code"].get<int>();
  r.compile_stderr = j.value("compile_stderr", "");
  r.run_stdout = j.value("run_stdout", "");
  r.run_stderr = j.value("run_stderr", "");
  r.compile_ms = j.value("compile_ms", 0LL);
  r.run_ms = j.value("run_ms", 0LL);
  r.timed_out = j.value("timed_out", false);
  r.infra_error = j.value("infra_error", "");
  r.detail = j.value("detail", "");
  return r;
}

namespace {

EvalRecord evaluate_one(const ExtractionOutcome& test, const ProfileSet& profiles, const RunPolicy& policy) {
  EvalRecord rec;
  rec.prompt_id = outcome_prompt_id(test);
  const auto* t = std::get_if<ExtractedTest>(&test);
  if (t == nullptr) {
    rec.outcome = classify(test, std::nullopt, std::nullopt);
    rec.detail = std::get<ParsingFailure>(test).reason;
    return rec;
  }

  auto profile = profiles.by_language.find(t->language);
  if (profile == profiles.by_language.end()) {
    rec.infra_error = "no " + std::string(to_string(t->language)) + " compiler in profile set '" + profiles.name + "'";
    return rec;
  }

  try {
    ScratchDir dir(policy.scratch_root, policy.keep_dirs);
    const auto compiled = compile(*t, profile->second, dir.path(), std::chrono::seconds(policy.compile_timeout_s));
    rec.compile_stderr = compiled.diagnostics;
    rec.compile_ms = ms(compiled.elapsed);
    if (!compiled.ok) {
      rec.outcome = classify(test, compiled, std::nullopt);
      return rec;
    }
    const auto run = execute(compiled.binary, policy);
    rec.exit_code = run.exit_code;
    rec.run_stdout = run.out;
    rec.run_stderr = run.err;
    rec.run_ms = ms(run.elapsed);
    rec.timed_out = run.timed_out;
    if (run.term_signal) rec.detail = "terminated by signal " + std::to_string(*run.term_signal);
    if (run.timed_out) rec.detail = "killed after " + std::to_string(policy.timeout_s) + " s timeout";
    rec.outcome = classify(test, compiled, run);
  } catch (const Error& e) {
    rec.outcome.reset();
    rec.infra_error = e.what();
  }
  return rec;
}

}  // namespace

std::vector<EvalRecord> evaluate_suite(const std::vector<ExtractionOutcome>& tests, const ProfileSet& profiles,
                                       const RunPolicy& policy, int workers) {
  if (workers < 1) throw Error(ErrorCode::InvalidParams, "workers must be >= 1");
  if (policy.timeout_s < 1) throw Error(ErrorCode::InvalidParams, "timeout_s must be >= 1");

  std::vector<EvalRecord> out(tests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tests.size(); i = next++) out[i] = evaluate_one(tests[i], profiles, policy);
  };
  std::vector<std::jthread> pool;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(tests.size(), 1));
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  pool.clear();
  return out;
}

void write_results(const std::vector<EvalRecord>& records, const std::filesystem::path& jsonl_path) {
  std::vector<Json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(jsonl_path, rows);
}

std::string results_csv(const std::vector<EvalRecord>& records) {
  std::string out = "prompt_id,outcome,exit_code\n";
  for (const auto& r : records) {
    out += r.prompt_id;
    out += ',';
    out += r.outcome ? std::string(to_string(*r.outcome)) : std::string("infra_error");
    out += ',';
    if (r.exit_code) out += std::to_string(*r.exit_code);
    out += '\n';
  }
  return out;
}

}  // namespace vvgen
