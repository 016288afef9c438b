#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vvgen/error.hpp"
#include "vvgen/harness.hpp"
#include "vvgen/llm_gateway.hpp"
#include "vvgen/prompt_forge.hpp"

namespace vvgen {

/// A parsed plan file. Relative paths are resolved against the plan's directory.
struct PipelineConfig {
  std::string name;
  std::filesystem::path spec_path;
  HeadingPattern heading;
  std::filesystem::path assets_dir;
  Json embedding = Json::object();
  std::size_t chunk_size = kDefaultChunkSize;
  std::size_t chunk_overlap = kDefaultChunkOverlap;
  std::map<std::string, ModelEndpoint> endpoints;
  Json profiles_json = Json::object();
  std::filesystem::path profiles_base;
  std::vector<StagePlan> stages;
  RetryPolicy retry;
  int parallelism = 1;
  std::optional<std::filesystem::path> replay;
  std::optional<std::filesystem::path> record;
  RunPolicy run_policy;
  int eval_workers = 1;
  std::optional<std::filesystem::path> annotations;
  std::filesystem::path out_dir;
};

PipelineConfig load_plan(const std::filesystem::path& plan_path);

/// Every StagePlan parsed from a JSON plan object; `rules` resolves named permutation rule sets.
StagePlan stage_from_json(const Json& j, const FeatureSelection& default_selection,
                          const std::map<std::string, PermutationRules>& rules);

struct Diagnostic {
  ErrorCode code;
  std::string message;
};

struct ValidationReport {
  std::vector<Diagnostic> diagnostics;
  std::optional<PlanArithmetic> arithmetic;
};

/// Never throws; problems come back as diagnostics.
ValidationReport validate_config(const std::filesystem::path& plan_path);

struct RunManifest {
  std::string plan_name;
  std::size_t suites = 0;
  std::size_t prompts = 0;
  std::map<std::string, std::string> artifacts;  // step -> directory
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  std::size_t generation_failures = 0;
  std::string started;
  std::string finished;
  std::string status;  // running, complete, failed
  std::string error;
};

Json to_json(const RunManifest& manifest);

struct RunOptions {
  bool resume = false;
  std::function<void(const std::string&)> log;
  /// Overrides the plan's backend choice (tests inject mocks here).
  const ChatBackend* backend = nullptr;
};

/// Steps: ingest, build-db, gen-prompts, generate, extract, evaluate, report.
/// Each step writes into `<out>/<step>-<digest12>/` and is skipped on resume
/// when that directory is complete. `manifest.json` is rewritten after every
/// step; on failure it is kept with status "failed" and the error rethrown.
RunManifest run_pipeline(const PipelineConfig& config, const RunOptions& options);

}  // namespace vvgen
