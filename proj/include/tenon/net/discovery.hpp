#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "tenon/net/protocol.hpp"

namespace tenon::net {

struct DiscoveredSession {
  Announce announce;
  std::string address;  // sender of the datagram
  friend bool operator==(const DiscoveredSession&, const DiscoveredSession&) = default;
};

// Listens on `port` for `window` and returns each distinct announcing
// session once, in order of first sighting. Datagrams with the wrong magic
// or malformed JSON are ignored.
std::vector<DiscoveredSession> discover(std::uint16_t port, std::chrono::milliseconds window,
                                        const std::string& bind_address = "0.0.0.0");

}  // namespace tenon::net
