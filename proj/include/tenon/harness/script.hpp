#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tenon/session/types.hpp"

namespace tenon::harness {

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Assertions over the log so far. Counts are exact; a type or code listed
// with 0 must not occur.
struct Expectation {
  std::map<std::string, int> events;  // event type -> count
  std::map<std::string, int> errors;  // Error code -> count
  std::optional<std::uint64_t> digest;
};

// One scripted line: either a command from `client` or an expectation
// checked after every command of its tick has been applied.
struct ScriptStep {
  std::int64_t at_tick = 0;
  std::string client;
  std::optional<CommandBody> command;
  std::optional<Expectation> expect;
};

struct Script {
  std::string catalog;  // resolved path, empty if the script names none
  std::string config;
  std::int64_t ticks = 0;  // run at least this many ticks
  std::vector<ScriptStep> steps;
  std::optional<Expectation> expect;  // checked at the end
};

// Accepts a bare array of steps or an object {catalog, config, ticks, steps,
// expect}. Relative paths resolve against `base_dir`. Throws ScriptError.
Script parse_script(const nlohmann::json& j, const std::string& base_dir = ".");
Script load_script_file(const std::string& path);

Expectation parse_expectation(const nlohmann::json& j);

}  // namespace tenon::harness
