#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vvgen {

struct ProcessSpec {
  std::vector<std::string> argv;
  std::filesystem::path cwd;
  /// Added to (or overriding) the parent environment.
  std::map<std::string, std::string> env;
  std::optional<std::chrono::milliseconds> timeout;
  /// Bytes kept per stream; the rest is read and discarded.
  std::size_t output_limit = 1 << 20;
};

struct ProcessResult {
  std::optional<int> exit_code;    // absent when killed by a signal
  std::optional<int> term_signal;
  bool timed_out = false;
  std::string out;
  std::string err;
  std::chrono::milliseconds elapsed{0};
};

/// Searches PATH (or takes `name` as-is when it contains a slash).
std::optional<std::filesystem::path> resolve_executable(const std::string& name);

/// Runs argv[0] in its own process group with stdin from /dev/null. On
/// timeout the whole group is killed with SIGKILL and `timed_out` is set.
/// Throws Error(SpawnFailure) when the program cannot be started.
ProcessResult run_process(const ProcessSpec& spec);

/// Splits a command template on whitespace, honouring single and double quotes.
std::vector<std::string> split_command(const std::string& command);

}  // namespace vvgen
