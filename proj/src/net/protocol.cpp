#include "tenon/net/protocol.hpp"

#include "tenon/core/hash.hpp"
#include "tenon/core/utf8.hpp"
#include "tenon/session/codec.hpp"

namespace tenon::net {

using json = nlohmann::json;

std::string encode(const Envelope& e) {
  json j;
  j["seq"] = e.seq;
  j["type"] = e.type;
  j["payload"] = e.payload;
  return j.dump();
}

std::optional<Envelope> decode(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto seq = j.find("seq");
  auto type = j.find("type");
  if (seq == j.end() || !seq->is_number_integer() || type == j.end() || !type->is_string()) return std::nullopt;
  Envelope e;
  e.seq = seq->get<std::int64_t>();
  e.type = type->get<std::string>();
  if (auto p = j.find("payload"); p != j.end()) {
    if (!p->is_object()) return std::nullopt;
    e.payload = *p;
  }
  return e;
}

std::optional<Hello> parse_hello(const json& p) {
  Hello h;
  auto v = p.find("protocol_version");
  if (v == p.end() || !v->is_number_integer()) return std::nullopt;
  h.protocol_version = v->get<int>();
  if (auto n = p.find("name"); n != p.end()) {
    if (!n->is_string()) return std::nullopt;
    h.name = n->get<std::string>();
  }
  if (auto r = p.find("resume_user_id"); r != p.end() && !r->is_null()) {
    if (!r->is_string()) return std::nullopt;
    h.resume_user_id = UserId(r->get<std::string>());
  }
  return h;
}

json hello_payload(const Hello& h) {
  json j{{"protocol_version", h.protocol_version}, {"name", h.name}};
  if (h.resume_user_id) j["resume_user_id"] = h.resume_user_id->str();
  return j;
}

json snapshot_payload(const SessionState& state) {
  auto snap = snapshot(state);
  return json{{"world", json::parse(snap.bytes)},
              {"presence", presence_to_json(state.presence)},
              {"event_seq", state.presence.event_seq},
              {"digest", to_hex(snap.digest)}};
}

json welcome_payload(const UserId& user, Role role, const SessionState& state) {
  return json{{"user_id", user.str()},
              {"role", std::string(to_string(role))},
              {"protocol_version", kProtocolVersion},
              {"catalog", json::parse(state.catalog->to_json())},
              {"snapshot", snapshot_payload(state)}};
}

Welcome parse_welcome(const json& p) {
  try {
    Welcome w;
    w.user_id = UserId(p.at("user_id").get<std::string>());
    w.role = p.at("role").get<std::string>() == "Host" ? Role::kHost : Role::kClient;
    const auto& s = p.at("snapshot");
    w.world = world_from_json(s.at("world"));
    w.presence = presence_from_json(s.at("presence"));
    w.event_seq = s.at("event_seq").get<std::uint64_t>();
    auto d = from_hex(s.at("digest").get<std::string>());
    if (!d) throw CodecError("welcome digest is not hex");
    w.digest = *d;
    return w;
  } catch (const json::exception& e) {
    throw CodecError(std::string("bad welcome: ") + e.what());
  }
}

std::string event_frame(const Event& event) {
  return encode(Envelope{static_cast<std::int64_t>(event.seq), "event", event_to_json(event)});
}

std::string encode_announce(const Announce& a) {
  auto build = [&](const std::string& name) {
    nlohmann::ordered_json j;
    j["magic"] = a.magic;
    j["session_name"] = name;
    j["host_port"] = a.host_port;
    j["protocol_version"] = a.protocol_version;
    return j.dump();
  };
  std::string name = a.session_name;
  std::string out = build(name);
  // Shorten by whole characters until it fits in one datagram.
  while (out.size() > kMaxAnnounceBytes && !name.empty()) {
    auto n = utf8::decode(name);
    if (!n) {
      name.pop_back();
    } else {
      n->pop_back();
      name.clear();
      for (auto cp : *n) name += utf8::encode(cp);
    }
    out = build(name);
  }
  return out;
}

std::optional<Announce> decode_announce(std::string_view datagram) {
  if (datagram.size() > kMaxAnnounceBytes) return std::nullopt;
  json j = json::parse(datagram, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  try {
    Announce a;
    a.magic = j.at("magic").get<std::string>();
    if (a.magic != kAnnounceMagic) return std::nullopt;
    a.session_name = j.at("session_name").get<std::string>();
    auto port = j.at("host_port").get<int>();
    if (port <= 0 || port > 65535) return std::nullopt;
    a.host_port = static_cast<std::uint16_t>(port);
    a.protocol_version = j.at("protocol_version").get<int>();
    return a;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace tenon::net
