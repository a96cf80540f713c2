#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "tenon/session/types.hpp"

namespace tenon {

// Input JSON does not describe a valid command, event, config, or snapshot.
class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::optional<Zone> zone_from_string(std::string_view s);

nlohmann::json world_to_json(const World& world);
World world_from_json(const nlohmann::json& j);

nlohmann::json presence_to_json(const Presence& presence);
Presence presence_from_json(const nlohmann::json& j);

nlohmann::json asset_to_json(const AssetRef& asset);
AssetRef asset_from_json(const nlohmann::json& j);

// Command literal: {"type": "Grab", "instance_id": "i3"}.
nlohmann::json command_to_json(const CommandBody& body);
CommandBody command_from_json(const nlohmann::json& j);

// Log/wire form: {"seq": n, "type": "...", "payload": {...}}. Command-driven
// events carry "by" and "cseq" inside the payload.
nlohmann::json event_to_json(const Event& event);
Event event_from_json(const nlohmann::json& j);

// One compact NDJSON line without the trailing newline.
std::string event_line(const Event& event);
Event parse_event_line(std::string_view line);

SessionConfig session_config_from_json(const nlohmann::json& j);
nlohmann::json session_config_to_json(const SessionConfig& config);
SessionConfig load_session_config_file(const std::string& path);

}  // namespace tenon
