#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "stylemetric/catalog.hpp"
#include "stylemetric/metric.hpp"

namespace stylemetric {

struct ServerOptions {
  TrainConfig train;
  int default_k = 5;
  std::uint64_t seed = 0;
  std::size_t max_pending_tasks = 10000;
};

/// JSON-over-HTTP front end of a catalog: model listing and thumbnails,
/// search, re-rank and six-choice triplet collection, background training.
class StyleServer {
public:
  explicit StyleServer(Catalog& catalog, ServerOptions options = {});
  ~StyleServer();
  StyleServer(const StyleServer&) = delete;
  StyleServer& operator=(const StyleServer&) = delete;

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stylemetric
