#include "vvgen/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include "vvgen/error.hpp"

namespace vvgen {

namespace {

const PromptMeta& meta_for(const MetaMap& meta, const std::string& id) {
  auto it = meta.find(id);
  if (it == meta.end()) throw Error(ErrorCode::MissingMetadata, id);
  return it->second;
}

int method_rank(const std::string& method) {
  try {
    return static_cast<int>(parse_prompt_method(method));
  } catch (const Error&) {
    return static_cast<int>(kAllPromptMethods.size());
  }
}

std::string method_label(const std::string& method) {
  try {
    return std::string(display_name(parse_prompt_method(method)));
  } catch (const Error&) {
    return method;
  }
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Table {
  std::string name;   // csv table id
  std::string title;  // markdown heading
  std::size_t labels = 0;
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;
};

std::string markdown(const std::vector<Table>& tables) {
  std::string out;
  for (const auto& t : tables) {
    if (!out.empty()) out += '\n';
    out += "## " + t.title + "\n\n|";
    for (const auto& h : t.headers) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < t.headers.size(); ++i) out += i < t.labels ? " --- |" : " ---: |";
    out += '\n';
    for (const auto& row : t.rows) {
      out += '|';
      for (const auto& c : row) out += " " + c + " |";
      out += '\n';
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string csv(const std::vector<Table>& tables) {
  std::string out = "table,llm,method,column,value\n";
  for (const auto& t : tables) {
    for (const auto& row : t.rows) {
      const std::string llm = t.labels >= 1 ? row[0] : "";
      const std::string method = t.labels >= 2 ? row[1] : "";
      for (std::size_t i = t.labels; i < row.size(); ++i) {
        if (row[i].empty()) continue;
        out += t.name + "," + csv_field(llm) + "," + csv_field(method) + "," + csv_field(t.headers[i]) + "," + row[i] +
               "\n";
      }
    }
  }
  return out;
}

}  // namespace

MetaMap meta_from_prompts(const std::vector<PromptRecord>& prompts) {
  MetaMap meta;
  for (const auto& p : prompts) {
    meta[p.id] = {p.llm, std::string(to_string(p.method)), p.feature.base_language};
  }
  return meta;
}

MetaMap load_meta(const std::filesystem::path& path) {
  const auto text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    // A whole-file object unless it is the first line of a JSON-lines file.
    try {
      const auto j = Json::parse(text);
      if (!j.contains("id")) {
        MetaMap meta;
        for (const auto& [id, m] : j.items()) {
          meta[id] = {m.at("llm").get<std::string>(), m.at("method").get<std::string>(),
                      parse_language(m.at("language").get<std::string>())};
        }
        return meta;
      }
    } catch (const Json::parse_error&) {
    }
  }
  std::vector<PromptRecord> prompts;
  for (const auto& row : read_jsonl(path)) prompts.push_back(prompt_from_json(row));
  return meta_from_prompts(prompts);
}

int display_percent(std::size_t part, std::size_t total) {
  if (total == 0) return 0;
  return static_cast<int>((200 * part + total) / (2 * total));
}

double SuiteReport::pass_pct() const {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(count(EvalOutcome::Pass)) / static_cast<double>(total);
}

std::vector<SuiteReport> tabulate(const std::vector<EvalRecord>& records, const MetaMap& meta) {
  std::map<std::tuple<std::string, int, std::string>, SuiteReport> groups;
  for (const auto& r : records) {
    const auto& m = meta_for(meta, r.prompt_id);
    auto& g = groups[{m.llm, method_rank(m.method), m.method}];
    g.llm = m.llm;
    g.method = m.method;
    if (!r.outcome) {
      ++g.infra_errors;
      continue;
    }
    ++g.counts[static_cast<std::size_t>(*r.outcome)];
    ++g.total;
  }
  std::vector<SuiteReport> out;
  out.reserve(groups.size());
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

std::vector<LanguageBreakdown> language_breakdown(const std::vector<EvalRecord>& records, const MetaMap& meta) {
  std::map<std::string, LanguageBreakdown> by_llm;
  for (const auto& r : records) {
    const auto& m = meta_for(meta, r.prompt_id);
    auto& b = by_llm[m.llm];
    b.llm = m.llm;
    if (!r.outcome) continue;
    auto& stat = b.per_language[m.language];
    ++stat.total;
    if (*r.outcome == EvalOutcome::Pass) ++stat.pass;
  }
  std::vector<LanguageBreakdown> out;
  for (auto& [_, b] : by_llm) out.push_back(std::move(b));
  return out;
}

void validate_annotation(const AnnotationRecord& r) {
  const auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::InvariantViolation, r.prompt_id + ": " + why);
  };
  if (std::find(kCorrectnessLevels.begin(), kCorrectnessLevels.end(), r.correctness) == kCorrectnessLevels.end()) {
    fail("correctness must be one of 0, 0.25, 0.5, 0.75, 1");
  }
  if (r.is_passing_test != r.true_pass.has_value()) fail("true_pass is set exactly for passing tests");
  if (r.is_passing_test && (r.base_language_error || r.openacc_error)) fail("error flags apply to failing tests only");
}

Json to_json(const AnnotationRecord& r) {
  Json j = {{"prompt_id", r.prompt_id}, {"is_passing_test", r.is_passing_test}};
  j["true_pass"] = r.true_pass ? Json(*r.true_pass) : Json(nullptr);
  j["correctness"] = r.correctness;
  j["base_language_error"] = r.base_language_error;
  j["openacc_error"] = r.openacc_error;
  return j;
}

AnnotationRecord annotation_from_json(const Json& j) {
  AnnotationRecord r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.is_passing_test = j.at("is_passing_test").get<bool>();
  if (j.contains("true_pass") && !j["true_pass"].is_null()) r.true_pass = j["true_pass"].get<bool>();
  r.correctness = j.at("correctness").get<double>();
  r.base_language_error = j.value("base_language_error", false);
  r.openacc_error = j.value("openacc_error", false);
  return r;
}

void append_annotation(const std::filesystem::path& ledger, const AnnotationRecord& record) {
  validate_annotation(record);
  if (ledger.has_parent_path()) std::filesystem::create_directories(ledger.parent_path());
  std::ofstream out(ledger, std::ios::binary | std::ios::app);
  out << to_json(record).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "cannot append to " + ledger.string());
}

std::vector<AnnotationRecord> read_annotations(const std::filesystem::path& ledger) {
  std::vector<AnnotationRecord> out;
  std::unordered_map<std::string, std::size_t> pos;
  for (const auto& row : read_jsonl(ledger)) {
    auto r = annotation_from_json(row);
    if (auto it = pos.find(r.prompt_id); it != pos.end()) {
      out[it->second] = std::move(r);
    } else {
      pos.emplace(r.prompt_id, out.size());
      out.push_back(std::move(r));
    }
  }
  return out;
}

AnalysisSummary summarize_annotations(const std::vector<AnnotationRecord>& annotations) {
  AnalysisSummary s;
  double pass_sum = 0.0;
  double fail_sum = 0.0;
  for (const auto& a : annotations) {
    validate_annotation(a);
    if (a.is_passing_test) {
      ++s.n_pass;
      pass_sum += a.correctness;
      if (*a.true_pass) ++s.n_true_pass;
    } else {
      ++s.n_fail;
      fail_sum += a.correctness;
      if (a.base_language_error) ++s.n_base_lang_error;
      if (a.openacc_error) ++s.n_openacc_error;
    }
  }
  const auto pct = [](std::size_t k, std::size_t n) {
    return n == 0 ? 0.0 : 100.0 * static_cast<double>(k) / static_cast<double>(n);
  };
  s.true_pass_pct = pct(s.n_true_pass, s.n_pass);
  s.base_lang_error_pct = pct(s.n_base_lang_error, s.n_fail);
  s.openacc_error_pct = pct(s.n_openacc_error, s.n_fail);
  s.pass_correctness_mean = s.n_pass == 0 ? 0.0 : pass_sum / static_cast<double>(s.n_pass);
  s.fail_correctness_mean = s.n_fail == 0 ? 0.0 : fail_sum / static_cast<double>(s.n_fail);
  return s;
}

ReportFormat parse_report_format(std::string_view name) {
  const auto n = to_lower(name);
  if (n == "markdown" || n == "md") return ReportFormat::Markdown;
  if (n == "csv") return ReportFormat::Csv;
  throw Error(ErrorCode::InvalidParams, "unknown report format '" + std::string(name) + "'");
}

std::string render_report(const std::vector<SuiteReport>& reports, const std::vector<LanguageBreakdown>& breakdowns,
                          const std::optional<AnalysisSummary>& summary, ReportFormat format) {
  std::vector<Table> tables;

  Table methods{"pass_by_method", "Pass percentage by method", 1, {"LLMs / Methods"}, {}};
  std::vector<std::string> method_keys;
  for (auto m : kAllPromptMethods) method_keys.emplace_back(to_string(m));
  for (const auto& r : reports) {
    if (std::find(method_keys.begin(), method_keys.end(), r.method) == method_keys.end() &&
        method_rank(r.method) == static_cast<int>(kAllPromptMethods.size())) {
      method_keys.push_back(r.method);
    }
  }
  for (const auto& k : method_keys) methods.headers.push_back(method_label(k));
  std::map<std::string, std::vector<std::string>> method_rows;
  for (const auto& r : reports) {
    auto& row = method_rows[r.llm];
    if (row.empty()) {
      row.assign(method_keys.size() + 1, "");
      row[0] = r.llm;
    }
    const auto label = method_label(r.method);
    for (std::size_t i = 0; i < method_keys.size(); ++i) {
      if (method_label(method_keys[i]) == label) row[i + 1] = std::to_string(r.pass_display());
    }
  }
  for (auto& [_, row] : method_rows) methods.rows.push_back(std::move(row));
  tables.push_back(std::move(methods));

  Table outcomes{"outcomes",
                 "Outcome counts",
                 2,
                 {"LLMs", "Method", "Parsing Error", "Compile Fail", "Runtime Fail", "Pass", "Total", "Pass %"},
                 {}};
  for (const auto& r : reports) {
    outcomes.rows.push_back({r.llm, method_label(r.method), std::to_string(r.count(EvalOutcome::ParsingError)),
                             std::to_string(r.count(EvalOutcome::CompileError)),
                             std::to_string(r.count(EvalOutcome::RuntimeFail)),
                             std::to_string(r.count(EvalOutcome::Pass)), std::to_string(r.total),
                             std::to_string(r.pass_display())});
  }
  tables.push_back(std::move(outcomes));

  Table langs{"pass_by_language", "Pass percentage per base language", 1, {"LLMs", "C", "C++", "Fortran"}, {}};
  for (const auto& b : breakdowns) {
    std::vector<std::string> row{b.llm};
    for (auto lang : {Language::C, Language::Cpp, Language::Fortran}) {
      auto it = b.per_language.find(lang);
      row.push_back(it == b.per_language.end() ? "" : std::to_string(it->second.display()));
    }
    langs.rows.push_back(std::move(row));
  }
  tables.push_back(std::move(langs));

  Table manual{"manual_analysis",
               "Manual analysis",
               0,
               {"Passing Sampled", "Failing Sampled", "True Pass", "Pass Correctness", "Fail Correctness",
                "Base Lang Error", "OpenACC Error"},
               {}};
  if (summary) {
    const auto& s = *summary;
    manual.rows.push_back({std::to_string(s.n_pass), std::to_string(s.n_fail),
                           std::to_string(display_percent(s.n_true_pass, s.n_pass)), fixed2(s.pass_correctness_mean),
                           fixed2(s.fail_correctness_mean), std::to_string(display_percent(s.n_base_lang_error, s.n_fail)),
                           std::to_string(display_percent(s.n_openacc_error, s.n_fail))});
  }
  tables.push_back(std::move(manual));

  return format == ReportFormat::Markdown ? markdown(tables) : csv(tables);
}

}  // namespace vvgen
