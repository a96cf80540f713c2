#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tenon/net/protocol.hpp"

namespace tenon::net {

// The server answered with an "error" frame.
class WireError : public std::runtime_error {
 public:
  WireError(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Blocking protocol client used by tests and the simulator. Every received
// frame is kept, and event frames are also kept as raw text so streams can
// be compared byte for byte.
class WireClient {
 public:
  WireClient(const std::string& host, std::uint16_t port,
             std::chrono::milliseconds timeout = std::chrono::milliseconds(10000));
  ~WireClient();

  WireClient(const WireClient&) = delete;
  WireClient& operator=(const WireClient&) = delete;

  // Sends hello and reads up to the welcome. Throws WireError.
  Welcome hello(const std::string& name, std::optional<UserId> resume = std::nullopt);

  std::int64_t send(const std::string& type, nlohmann::json payload);
  std::int64_t command(const CommandBody& body);
  void send_text(const std::string& text);  // no seq bookkeeping

  // Next frame from the server; throws on timeout or close.
  Envelope read();

  // ping, then read until the matching pong. Returns the frames before it.
  // Throws WireError if an error frame arrives first.
  std::vector<Envelope> sync();

  const std::vector<std::string>& event_frames() const noexcept { return event_frames_; }
  const std::vector<Envelope>& errors() const noexcept { return errors_; }
  std::optional<Welcome> welcome() const { return welcome_; }

  std::int64_t next_seq() const noexcept { return next_seq_; }
  void set_next_seq(std::int64_t s) noexcept { next_seq_ = s; }

  bool closed_by_server();
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::int64_t next_seq_ = 1;
  std::vector<std::string> event_frames_;
  std::vector<Envelope> errors_;
  std::optional<Welcome> welcome_;
};

// Rebuilds server state on the client side: the welcome snapshot with
// subsequent events applied. Used to check join consistency.
SessionState fold_view(std::shared_ptr<const PartCatalog> catalog, const Welcome& welcome,
                       const std::vector<std::string>& event_frames);

}  // namespace tenon::net
