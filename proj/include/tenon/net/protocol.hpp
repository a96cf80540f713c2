#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "tenon/session/engine.hpp"

namespace tenon::net {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::string_view kAnnounceMagic = "HVRMT1";
inline constexpr std::size_t kMaxAnnounceBytes = 512;

// Wire-level error codes (engine rejections travel as Error events instead).
namespace wire_codes {
inline constexpr const char* kBadSeq = "BAD_SEQ";
inline constexpr const char* kMalformed = "MALFORMED";
inline constexpr const char* kVersionMismatch = "VERSION_MISMATCH";
inline constexpr const char* kSessionFull = "SESSION_FULL";
}  // namespace wire_codes

// Every frame, both directions: {"seq": n, "type": "...", "payload": {...}}.
// Client frames number themselves 1, 2, 3... per connection (hello is 1).
// Server frames carry the event_seq they were sent at; for "event" frames
// that is the event's own seq.
struct Envelope {
  std::int64_t seq = 0;
  std::string type;
  nlohmann::json payload = nlohmann::json::object();
};

std::string encode(const Envelope& e);
// nullopt for anything that is not a JSON object with integer seq, string
// type and object payload.
std::optional<Envelope> decode(std::string_view text);

struct Hello {
  int protocol_version = 0;
  std::string name;
  std::optional<UserId> resume_user_id;
};

std::optional<Hello> parse_hello(const nlohmann::json& payload);
nlohmann::json hello_payload(const Hello& h);

// welcome.snapshot: the state a joining client folds subsequent events onto.
nlohmann::json snapshot_payload(const SessionState& state);

struct Welcome {
  UserId user_id;
  Role role = Role::kClient;
  World world;
  Presence presence;
  std::uint64_t event_seq = 0;
  std::uint64_t digest = 0;
};

nlohmann::json welcome_payload(const UserId& user, Role role, const SessionState& state);
Welcome parse_welcome(const nlohmann::json& payload);  // throws CodecError

// Event frames are built once and shared by every connection.
std::string event_frame(const Event& event);

struct Announce {
  std::string magic = std::string(kAnnounceMagic);
  std::string session_name;
  std::uint16_t host_port = 0;
  int protocol_version = kProtocolVersion;
  friend bool operator==(const Announce&, const Announce&) = default;
};

// Fixed-field JSON, at most 512 bytes (long session names are shortened).
std::string encode_announce(const Announce& a);
// nullopt on malformed JSON or wrong magic.
std::optional<Announce> decode_announce(std::string_view datagram);

}  // namespace tenon::net
