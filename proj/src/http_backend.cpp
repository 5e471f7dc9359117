#include <httplib.h>

#include <cstdlib>
#include <json.hpp>

#include "dialogcode/backend.hpp"
#include "dialogcode/error.hpp"
#include "dialogcode/keyword_coder.hpp"
#include "dialogcode/http_backend.hpp"

namespace dialogcode {
namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("invalid_endpoint", "endpoint needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

LiveBackend::LiveBackend(LiveBackendConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw ValidationError("invalid_endpoint", "live backend needs an endpoint");
  split_endpoint(config_.endpoint);
}

std::string LiveBackend::id() const { return "live:" + config_.model; }

std::string LiveBackend::send(std::span<const Message> messages) {
  nlohmann::json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }

  const auto [origin, path] = split_endpoint(config_.endpoint);
  httplib::Client client(origin);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);

  httplib::Headers headers;
  if (!config_.key_env.empty()) {
    if (const char* key = std::getenv(config_.key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  auto result = client.Post(path, headers, body.dump(), "application/json");
  if (!result) throw BackendError("request to " + origin + " failed: " + httplib::to_string(result.error()));
  if (result->status != 200) {
    throw BackendError("backend answered HTTP " + std::to_string(result->status));
  }

  const auto reply = nlohmann::json::parse(result->body, nullptr, false);
  if (reply.is_discarded()) throw BackendError("backend reply is not JSON");
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw BackendError("backend reply lacks choices[0].message.content");
  }
}

std::unique_ptr<Backend> make_backend(std::string_view id, const Codebook& codebook,
                                      const std::optional<LiveBackendConfig>& live) {
  if (id == kMockKeywordBackend) return std::make_unique<KeywordBackend>(default_keyword_rules(codebook));
  if (id == kLiveBackend) {
    if (!live) throw ValidationError("missing_backend_config", "backend 'live' needs endpoint configuration");
    return std::make_unique<LiveBackend>(*live);
  }
  throw ValidationError("unknown_backend", "unknown backend '" + std::string(id) + "'");
}

}  // namespace dialogcode
