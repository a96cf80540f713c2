#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tenon/pipeline/jobs.hpp"
#include "tenon/session/engine.hpp"

namespace tenon::net {

class BindError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerOptions {
  std::string address = "0.0.0.0";
  std::uint16_t port = 7474;  // 0 picks a free port

  bool announce = true;
  std::uint16_t announce_port = 7475;
  std::string announce_target = "255.255.255.255";
  std::chrono::milliseconds announce_interval{2000};

  // A connection that sends nothing (not even ping) for this long is dropped.
  std::chrono::milliseconds idle_timeout{30000};
  // How long a departed user may come back under the same id (cards kept).
  std::chrono::seconds resume_window{300};

  // NDJSON event log, one engine event per line; empty disables.
  std::string log_path;

  // With a worker the pipeline polls itself every `pipeline_interval`;
  // without one the owner calls Server::pipeline_tick().
  bool pipeline_worker = true;
  std::chrono::milliseconds pipeline_interval{100};

  // Source of Command::time_ms. Defaults to milliseconds since start().
  std::function<std::int64_t()> clock;
};

// One session per process: WebSocket front door, engine, generation
// pipeline and LAN announcer. All engine work runs on a single I/O thread;
// the public accessors below are safe to call from any other thread.
class Server {
 public:
  Server(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config,
         pipeline::PipelineConfig pipeline_config, pipeline::Backends backends, ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts serving. Throws BindError.
  void start();
  void stop();

  std::uint16_t port() const;

  std::uint64_t digest();
  std::vector<Event> events();
  SessionState state();
  std::size_t connections();

  // Polls every live pipeline job once on the calling thread, then waits
  // until the results it produced have gone through the engine.
  void pipeline_tick();
  bool pipeline_busy() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace tenon::net
