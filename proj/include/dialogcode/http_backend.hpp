#pragma once

#include "dialogcode/backend.hpp"

namespace dialogcode {

// Chat-completion client: POSTs {model, messages:[{role, content}]} and reads
// choices[0].message.content. Non-200 replies and transport errors surface as
// BackendError.
class LiveBackend final : public Backend {
 public:
  explicit LiveBackend(LiveBackendConfig config);

  std::string id() const override;
  bool deterministic() const override { return false; }
  std::string send(std::span<const Message> messages) override;

 private:
  LiveBackendConfig config_;
};

}  // namespace dialogcode
