#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dialogcode/codebook.hpp"

namespace dialogcode {

enum class Role { system, user, assistant };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);

struct Message {
  Role role = Role::user;
  std::string content;

  bool operator==(const Message&) const = default;
};

// A chat-style coding agent. `send` receives the whole session history in
// order and returns the reply to the last message. Implementations throw
// BackendError on transport failure.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual bool deterministic() const = 0;
  virtual std::string send(std::span<const Message> messages) = 0;
};

// Run-configuration for a live chat-completion endpoint. The credential is
// read from the named environment variable at send time and never stored.
struct LiveBackendConfig {
  std::string endpoint;  // e.g. https://host/v1/chat/completions
  std::string model;
  std::string key_env = "CODER_BACKEND_KEY";
  int timeout_seconds = 120;
};

inline constexpr std::string_view kMockKeywordBackend = "mock-keyword";
inline constexpr std::string_view kLiveBackend = "live";

// Builds `mock-keyword` (needs the CDAS ids in `codebook`) or `live`
// (needs `live`). Throws ValidationError for unknown ids.
std::unique_ptr<Backend> make_backend(std::string_view id, const Codebook& codebook,
                                      const std::optional<LiveBackendConfig>& live = std::nullopt);

}  // namespace dialogcode
