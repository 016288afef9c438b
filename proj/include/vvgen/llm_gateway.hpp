#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vvgen/prompt_forge.hpp"

namespace vvgen {

struct ModelEndpoint {
  std::string name;
  std::string base_url;  // full URL of the chat-completions route
  std::string model_name;
  std::string auth_env_var;
  double temperature = 0.2;
  int max_output_tokens = 4096;
  int request_timeout_s = 120;

  /// Remote endpoints need a bearer token read from `auth_env_var`.
  bool is_remote() const noexcept { return !base_url.empty(); }
};

ModelEndpoint endpoint_from_json(const std::string& name, const Json& j);
/// Throws InvalidConfig on a negative temperature or non-positive token budget.
void validate_endpoint(const ModelEndpoint& endpoint);

enum class FinishReason { Stop, Length, Error };
std::string_view to_string(FinishReason reason) noexcept;
FinishReason parse_finish_reason(std::string_view name);

struct GenerationRecord {
  std::string prompt_id;
  std::string raw_text;
  std::string model_name;
  FinishReason finish_reason = FinishReason::Stop;
  long long latency_ms = 0;
  int attempt = 1;
  std::string error;  // set when finish_reason is Error
};

Json to_json(const GenerationRecord& record);
GenerationRecord generation_from_json(const Json& j);

/// Replay fixtures, keyed by the SHA-256 of the exact prompt text.
class FixtureStore {
 public:
  static std::string digest(std::string_view prompt_text) { return sha256_hex(prompt_text); }

  void put(const std::string& prompt_digest, std::string raw_text);
  const std::string* get(const std::string& prompt_digest) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

  static FixtureStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// One reply from a backend.
struct ChatReply {
  std::string text;
  FinishReason finish_reason = FinishReason::Stop;
};

/// A retryable failure (transport error, HTTP 5xx/429, missing fixture).
class TransientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Throws TransientError for retryable failures, Error otherwise.
  virtual ChatReply send(const ModelEndpoint& endpoint, const std::string& prompt) const = 0;
};

/// Chat-completion wire format over HTTP(S).
class HttpChatBackend final : public ChatBackend {
 public:
  ChatReply send(const ModelEndpoint& endpoint, const std::string& prompt) const override;
};

/// Serves recorded responses; an unknown prompt is a transient miss.
class ReplayBackend final : public ChatBackend {
 public:
  explicit ReplayBackend(FixtureStore fixtures) : fixtures_(std::move(fixtures)) {}
  ChatReply send(const ModelEndpoint& endpoint, const std::string& prompt) const override;

 private:
  FixtureStore fixtures_;
};

std::string chat_request_body(const ModelEndpoint& endpoint, const std::string& prompt);
ChatReply parse_chat_response(const std::string& body);

struct RetryPolicy {
  int max_attempts = 3;
  /// Sleep before attempt n+1 is `backoff_unit * n`.
  std::chrono::milliseconds backoff_unit{2000};
};

using AttemptLogger = std::function<void(const std::string& prompt_id, int attempt, const std::string& what)>;

struct Gateway {
  ModelEndpoint endpoint;
  const ChatBackend* backend = nullptr;
  RetryPolicy retry;
  AttemptLogger log;
  /// Require the bearer token before contacting the backend.
  bool require_auth = true;
};

GenerationRecord complete(const PromptRecord& prompt, const Gateway& gateway);

/// One record per prompt, in input order; failures become finish_reason=error.
std::vector<GenerationRecord> batch_generate(const std::vector<PromptRecord>& prompts,
                                             const Gateway& gateway, int parallelism);

FixtureStore record_fixtures(const std::vector<GenerationRecord>& records,
                             const std::vector<PromptRecord>& prompts);

}  // namespace vvgen
