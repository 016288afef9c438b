#pragma once

#include <chrono>
#include <optional>
#include <string>

namespace vvgen {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// POSTs a JSON body to an absolute http(s) URL. Returns nullopt on transport
/// failure (connection refused, timeout, TLS error); `transport_error` then
/// holds a description.
std::optional<HttpResponse> http_post_json(const std::string& url, const std::string& body,
                                           const std::optional<std::string>& bearer_token,
                                           std::chrono::seconds timeout,
                                           std::string* transport_error = nullptr);

/// Reads a bearer token from the named environment variable.
std::optional<std::string> token_from_env(const std::string& var);

}  // namespace vvgen
