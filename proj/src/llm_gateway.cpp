#include "vvgen/llm_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <unordered_map>

#include "vvgen/error.hpp"
#include "vvgen/http.hpp"

namespace vvgen {

ModelEndpoint endpoint_from_json(const std::string& name, const Json& j) {
  ModelEndpoint e;
  e.name = name;
  e.base_url = j.value("base_url", "");
  e.model_name = j.value("model", name);
  e.auth_env_var = j.value("auth_env", "");
  e.temperature = j.value("temperature", 0.2);
  e.max_output_tokens = j.value("max_output_tokens", 4096);
  e.request_timeout_s = j.value("request_timeout_s", 120);
  validate_endpoint(e);
  return e;
}

void validate_endpoint(const ModelEndpoint& e) {
  if (e.temperature < 0.0) throw Error(ErrorCode::InvalidConfig, e.name + ": temperature must be >= 0");
  if (e.max_output_tokens < 1) throw Error(ErrorCode::InvalidConfig, e.name + ": max_output_tokens must be >= 1");
  if (e.request_timeout_s < 1) throw Error(ErrorCode::InvalidConfig, e.name + ": request_timeout_s must be >= 1");
}

std::string_view to_string(FinishReason reason) noexcept {
  switch (reason) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "?";
}

FinishReason parse_finish_reason(std::string_view name) {
  if (name == "length") return FinishReason::Length;
  if (name == "error") return FinishReason::Error;
  return FinishReason::Stop;
}

Json to_json(const GenerationRecord& r) {
  Json j = {{"prompt_id", r.prompt_id},
            {"raw_text", r.raw_text},
            {"model_name", r.model_name},
            {"finish_reason", to_string(r.finish_reason)},
            {"latency_ms", r.latency_ms},
            {"attempt", r.attempt}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

GenerationRecord generation_from_json(const Json& j) {
  GenerationRecord r;
  r.prompt_id = j.at("prompt_id").get<std::string>();
  r.raw_text = j.value("raw_text", "");
  r.model_name = j.value("model_name", "");
  r.finish_reason = parse_finish_reason(j.value("finish_reason", "stop"));
  r.latency_ms = j.value("latency_ms", 0LL);
  r.attempt = j.value("attempt", 1);
  r.error = j.value("error", "");
  return r;
}

void FixtureStore::put(const std::string& prompt_digest, std::string raw_text) {
  entries_[prompt_digest] = std::move(raw_text);
}

const std::string* FixtureStore::get(const std::string& prompt_digest) const {
  auto it = entries_.find(prompt_digest);
  return it == entries_.end() ? nullptr : &it->second;
}

FixtureStore FixtureStore::load(const std::filesystem::path& path) {
  FixtureStore store;
  const Json doc = Json::parse(read_file(path));
  for (const auto& [digest, text] : doc.items()) store.put(digest, text.get<std::string>());
  return store;
}

void FixtureStore::save(const std::filesystem::path& path) const {
  Json doc = Json::object();
  for (const auto& [digest, text] : entries_) doc[digest] = text;
  write_file(path, doc.dump(2) + "\n");
}

std::string chat_request_body(const ModelEndpoint& endpoint, const std::string& prompt) {
  Json body = {{"model", endpoint.model_name},
               {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", endpoint.temperature},
               {"max_tokens", endpoint.max_output_tokens}};
  return body.dump();
}

ChatReply parse_chat_response(const std::string& body) {
  try {
    const Json doc = Json::parse(body);
    const auto& choice = doc.at("choices").at(0);
    ChatReply reply;
    if (choice.contains("message")) {
      const auto& content = choice["message"].at("content");
      reply.text = content.is_null() ? "" : content.get<std::string>();
    } else {
      reply.text = choice.at("text").get<std::string>();
    }
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string() &&
        choice["finish_reason"].get<std::string>() == "length") {
      reply.finish_reason = FinishReason::Length;
    }
    return reply;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, e.what());
  }
}

ChatReply HttpChatBackend::send(const ModelEndpoint& endpoint, const std::string& prompt) const {
  std::string transport_error;
  const auto res = http_post_json(endpoint.base_url, chat_request_body(endpoint, prompt),
                                  token_from_env(endpoint.auth_env_var),
                                  std::chrono::seconds(endpoint.request_timeout_s), &transport_error);
  if (!res) throw TransientError("transport: " + transport_error);
  if (res->status == 429 || res->status >= 500) {
    throw TransientError("HTTP " + std::to_string(res->status));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::Exhausted, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return parse_chat_response(res->body);
}

ChatReply ReplayBackend::send(const ModelEndpoint&, const std::string& prompt) const {
  if (const auto* text = fixtures_.get(FixtureStore::digest(prompt))) return {*text, FinishReason::Stop};
  throw TransientError("no fixture for prompt digest " + FixtureStore::digest(prompt));
}

namespace {

void check_auth(const Gateway& g) {
  if (!g.require_auth || !g.endpoint.is_remote() || g.endpoint.auth_env_var.empty()) return;
  if (!token_from_env(g.endpoint.auth_env_var)) {
    throw Error(ErrorCode::AuthMissing, "environment variable " + g.endpoint.auth_env_var + " is not set");
  }
}

}  // namespace

GenerationRecord complete(const PromptRecord& prompt, const Gateway& gateway) {
  check_auth(gateway);
  if (gateway.backend == nullptr) throw Error(ErrorCode::InvalidConfig, "gateway has no backend");

  std::string last_error;
  const int attempts = std::max(1, gateway.retry.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto reply = gateway.backend->send(gateway.endpoint, prompt.text);
      GenerationRecord r;
      r.prompt_id = prompt.id;
      r.raw_text = reply.text;
      r.model_name = gateway.endpoint.model_name;
      r.finish_reason = reply.finish_reason;
      r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
      r.attempt = attempt;
      return r;
    } catch (const TransientError& e) {
      last_error = e.what();
      if (gateway.log) gateway.log(prompt.id, attempt, last_error);
    }
    if (attempt < attempts) std::this_thread::sleep_for(gateway.retry.backoff_unit * attempt);
  }
  throw Error(ErrorCode::Exhausted, "after " + std::to_string(attempts) + " attempts: " + last_error);
}

std::vector<GenerationRecord> batch_generate(const std::vector<PromptRecord>& prompts,
                                             const Gateway& gateway, int parallelism) {
  if (parallelism < 1) throw Error(ErrorCode::InvalidParams, "parallelism must be >= 1");
  check_auth(gateway);

  std::vector<GenerationRecord> out(prompts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        out[i] = complete(prompts[i], gateway);
      } catch (const Error& e) {
        GenerationRecord r;
        r.prompt_id = prompts[i].id;
        r.model_name = gateway.endpoint.model_name;
        r.finish_reason = FinishReason::Error;
        r.attempt = std::max(1, gateway.retry.max_attempts);
        r.error = e.what();
        out[i] = std::move(r);
      }
    }
  };

  const auto n = std::min<std::size_t>(static_cast<std::size_t>(parallelism), std::max<std::size_t>(prompts.size(), 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  return out;
}

FixtureStore record_fixtures(const std::vector<GenerationRecord>& records,
                             const std::vector<PromptRecord>& prompts) {
  std::unordered_map<std::string, const PromptRecord*> by_id;
  for (const auto& p : prompts) by_id.emplace(p.id, &p);

  FixtureStore store;
  for (const auto& r : records) {
    auto it = by_id.find(r.prompt_id);
    if (it == by_id.end()) throw Error(ErrorCode::DanglingPromptId, r.prompt_id);
    if (r.finish_reason == FinishReason::Error) continue;
    store.put(FixtureStore::digest(it->second->text), r.raw_text);
  }
  return store;
}

}  // namespace vvgen
