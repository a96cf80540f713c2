#include "tenon/harness/script.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include "tenon/core/hash.hpp"
#include "tenon/session/codec.hpp"

namespace tenon::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <std::size_t... I>
std::set<std::string> event_names(std::index_sequence<I...>) {
  return {std::string(event_name(EventBody(std::in_place_index<I>)))...};
}

const std::set<std::string>& known_events() {
  static const auto names = event_names(std::make_index_sequence<std::variant_size_v<EventBody>>{});
  return names;
}

std::map<std::string, int> counts(const json& j, const char* what, bool check_names) {
  if (!j.is_object()) throw ScriptError(std::string(what) + " must be an object of counts");
  std::map<std::string, int> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_number_integer() || v.get<int>() < 0) throw ScriptError(std::string(what) + "." + k + " must be >= 0");
    if (check_names && !known_events().contains(k)) throw ScriptError("unknown event type " + k);
    out[k] = v.get<int>();
  }
  return out;
}

std::string resolve(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key)) return {};
  if (!j[key].is_string()) throw ScriptError(std::string(key) + " must be a path string");
  fs::path p = j[key].get<std::string>();
  return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

ScriptStep parse_step(const json& j, std::size_t index) {
  const auto where = "step " + std::to_string(index) + ": ";
  if (!j.is_object()) throw ScriptError(where + "not an object");
  ScriptStep s;
  if (!j.contains("at_tick") || !j["at_tick"].is_number_integer() || j["at_tick"].get<std::int64_t>() < 0) {
    throw ScriptError(where + "at_tick must be a non-negative integer");
  }
  s.at_tick = j["at_tick"].get<std::int64_t>();
  const bool has_cmd = j.contains("command");
  const bool has_expect = j.contains("expect");
  if (has_cmd == has_expect) throw ScriptError(where + "needs exactly one of command or expect");
  if (has_expect) {
    try {
      s.expect = parse_expectation(j["expect"]);
    } catch (const ScriptError& e) {
      throw ScriptError(where + e.what());
    }
    return s;
  }
  if (!j.contains("client") || !j["client"].is_string() || j["client"].get<std::string>().empty()) {
    throw ScriptError(where + "client must be a non-empty name");
  }
  s.client = j["client"].get<std::string>();
  try {
    s.command = command_from_json(j["command"]);
  } catch (const std::exception& e) {
    throw ScriptError(where + "bad command: " + e.what());
  }
  return s;
}

}  // namespace

Expectation parse_expectation(const json& j) {
  if (!j.is_object()) throw ScriptError("expect must be an object");
  Expectation e;
  for (const auto& [k, v] : j.items()) {
    if (k == "events") {
      e.events = counts(v, "events", true);
    } else if (k == "errors") {
      e.errors = counts(v, "errors", false);
    } else if (k == "digest") {
      auto d = v.is_string() ? from_hex(v.get<std::string>()) : std::nullopt;
      if (!d) throw ScriptError("digest must be 16 hex digits");
      e.digest = d;
    } else {
      throw ScriptError("unknown expect key " + k);
    }
  }
  return e;
}

Script parse_script(const json& j, const std::string& base_dir) {
  Script script;
  const json* steps = &j;
  if (j.is_object()) {
    const fs::path base = base_dir;
    script.catalog = resolve(j, "catalog", base);
    script.config = resolve(j, "config", base);
    if (j.contains("ticks")) {
      if (!j["ticks"].is_number_integer() || j["ticks"].get<std::int64_t>() < 0) {
        throw ScriptError("ticks must be a non-negative integer");
      }
      script.ticks = j["ticks"].get<std::int64_t>();
    }
    if (j.contains("expect")) script.expect = parse_expectation(j["expect"]);
    if (!j.contains("steps")) throw ScriptError("missing steps");
    steps = &j["steps"];
  }
  if (!steps->is_array()) throw ScriptError("steps must be an array");
  for (std::size_t i = 0; i < steps->size(); ++i) {
    auto step = parse_step((*steps)[i], i);
    if (!script.steps.empty() && step.at_tick < script.steps.back().at_tick) {
      throw ScriptError("step " + std::to_string(i) + ": at_tick goes backwards");
    }
    script.steps.push_back(std::move(step));
  }
  return script;
}

Script load_script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError("cannot read script " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScriptError(path + ": " + e.what());
  }
  return parse_script(j, fs::path(path).parent_path().string());
}

}  // namespace tenon::harness
