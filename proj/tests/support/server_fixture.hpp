#pragma once

#include <memory>

#include "session_fixture.hpp"
#include "temp_dir.hpp"
#include "tenon/net/client.hpp"
#include "tenon/net/server.hpp"

namespace tenon::testing {

inline net::ServerOptions loopback_options() {
  net::ServerOptions o;
  o.address = "127.0.0.1";
  o.port = 0;
  o.announce = false;
  return o;
}

// A started server on a free loopback port with mock backends.
struct LiveServer {
  TempDir dir;
  std::unique_ptr<net::Server> server;

  explicit LiveServer(net::ServerOptions options = loopback_options(), SessionConfig config = mini_config(),
                      int model_ticks = 1) {
    pipeline::PipelineConfig pc;
    pc.asset_dir = (dir.path() / "assets").string();
    pc.mock_model_ticks = model_ticks;
    server = std::make_unique<net::Server>(mini_catalog(), config, pc, pipeline::make_backends(pc, *mini_catalog()),
                                           std::move(options));
    server->start();
  }

  std::unique_ptr<net::WireClient> connect() {
    return std::make_unique<net::WireClient>("127.0.0.1", server->port());
  }

  net::Server* operator->() { return server.get(); }
};

}  // namespace tenon::testing
