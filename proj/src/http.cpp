#include "vvgen/http.hpp"

#include <cstdlib>

#include "httplib.h"
#include "vvgen/error.hpp"

namespace vvgen {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidConfig, "endpoint URL needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::optional<HttpResponse> http_post_json(const std::string& url, const std::string& body,
                                           const std::optional<std::string>& bearer_token,
                                           std::chrono::seconds timeout,
                                           std::string* transport_error) {
  const auto parts = split_url(url);
  httplib::Client client(parts.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (bearer_token) client.set_bearer_token_auth(*bearer_token);

  auto res = client.Post(parts.path, body, "application/json");
  if (!res) {
    if (transport_error) *transport_error = httplib::to_string(res.error());
    return std::nullopt;
  }
  return HttpResponse{res->status, res->body};
}

std::optional<std::string> token_from_env(const std::string& var) {
  if (var.empty()) return std::nullopt;
  const char* value = std::getenv(var.c_str());
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

}  // namespace vvgen
