#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dialogcode/backend.hpp"

namespace dialogcode {

class Store;

// JSON API over a data directory, consumed by the review UI:
//   GET  /api/lessons
//   GET  /api/lessons/{id}/turns?from=&to=
//   GET  /api/configs/{hash}/codebook
//   GET  /api/runs
//   POST /api/runs                       {lesson_id, config_hash, backend, batch_size}
//   GET  /api/runs/{id}
//   GET  /api/runs/{id}/results
//   POST /api/runs/{id}/adjudications    {turn_id, codes, note}
//   POST /api/runs/{id}/feedback/compile
//   GET  /api/runs/{id}/metrics?mode=exact|overlap
// Errors are {error, message}: 404 unknown ids, 422 validation, 409 run not
// complete, 500 store failures.
class Service {
 public:
  // Takes the store lock and verifies every stored file; throws StoreError
  // naming the first corrupt file.
  explicit Service(std::filesystem::path data_dir, std::optional<LiveBackendConfig> live = std::nullopt);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds to host:port (port 0 picks a free one) and returns the bound port.
  // Throws Error("port_bind") on failure.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void serve();
  void stop();
  // Blocks until every background coding run has finished.
  void wait_for_runs();

  const std::vector<std::string>& warnings() const noexcept;
  Store& store() noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dialogcode
