#pragma once

#include <httplib.h>

#include <memory>
#include <optional>
#include <string>

namespace tenon::pipeline {

struct Url {
  std::string scheme;  // http | https
  std::string host;
  int port = 0;
  std::string path;  // includes query, never empty

  std::string origin() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

inline std::optional<Url> parse_url(const std::string& s) {
  Url u;
  auto sep = s.find("://");
  if (sep == std::string::npos) return std::nullopt;
  u.scheme = s.substr(0, sep);
  if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
  auto rest = s.substr(sep + 3);
  auto slash = rest.find('/');
  auto authority = rest.substr(0, slash);
  u.path = slash == std::string::npos ? "/" : rest.substr(slash);
  auto colon = authority.rfind(':');
  if (colon != std::string::npos && authority.find(']') == std::string::npos) {
    u.host = authority.substr(0, colon);
    try {
      u.port = std::stoi(authority.substr(colon + 1));
    } catch (...) {
      return std::nullopt;
    }
  } else {
    u.host = authority;
    u.port = u.scheme == "https" ? 443 : 80;
  }
  if (u.host.empty() || u.port <= 0 || u.port > 65535) return std::nullopt;
  return u;
}

inline std::unique_ptr<httplib::Client> make_client(const Url& url) {
  auto c = std::make_unique<httplib::Client>(url.origin());
  c->set_connection_timeout(10);
  c->set_read_timeout(60);
  c->set_follow_location(true);
  return c;
}

}  // namespace tenon::pipeline
