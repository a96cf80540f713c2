// tenon: run a session server, check catalogs, script simulations, replay logs.

#include <signal.h>
#include <stdlib.h>

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "tenon/core/hash.hpp"
#include "tenon/harness/simulate.hpp"
#include "tenon/net/discovery.hpp"
#include "tenon/net/server.hpp"
#include "tenon/session/codec.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tenon;

namespace {

enum Exit : int { kOk = 0, kFailed = 1, kUsage = 2, kBadCatalog = 3, kBind = 4, kMismatch = 5 };

// Thrown from subcommands to leave with a specific status.
struct Quit {
  int code;
  std::string message;
};

std::shared_ptr<const PartCatalog> load_catalog_or_quit(const std::string& path, bool require_foldable = true) {
  try {
    return std::make_shared<const PartCatalog>(load_catalog_file(path, LoadOptions{require_foldable}));
  } catch (const ValidationError& e) {
    throw Quit{kBadCatalog, std::string("ValidationError: ") + e.what()};
  } catch (const ParseError& e) {
    throw Quit{kBadCatalog, "ParseError at " + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " +
                                e.what()};
  } catch (const CatalogError& e) {
    throw Quit{kBadCatalog, e.what()};
  }
}

struct LoadedConfig {
  SessionConfig session;
  pipeline::PipelineConfig pipeline;
};

// Without a config file every primitive part is spawned once.
LoadedConfig load_config_or_quit(const std::string& path, const PartCatalog& catalog) {
  LoadedConfig out;
  if (path.empty()) {
    out.session.session_name = "tenon";
    for (const auto& [id, p] : catalog.parts()) {
      if (p.kind == PartKind::kPrimitive) out.session.spawn.push_back(SpawnEntry{id, 1});
    }
    out.pipeline = pipeline::pipeline_config_from_json(json::object());
    return out;
  }
  std::ifstream in(path);
  if (!in) throw Quit{kUsage, "cannot read config " + path};
  try {
    auto j = json::parse(in);
    out.session = session_config_from_json(j);
    out.pipeline = pipeline::pipeline_config_from_json(j.value("pipeline", json::object()));
  } catch (const std::exception& e) {
    throw Quit{kUsage, "bad config " + path + ": " + e.what()};
  }
  for (const auto& s : out.session.spawn) {
    if (!catalog.contains(s.part)) throw Quit{kUsage, "config spawns unknown part " + s.part.str()};
  }
  return out;
}

void apply_mode(pipeline::PipelineConfig& pc, const std::string& mode) {
  if (mode == "mock") pc.mode = pipeline::Mode::kMock;
  if (mode == "real") pc.mode = pipeline::Mode::kReal;
}

std::pair<std::string, std::uint16_t> split_listen(const std::string& listen) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos || colon == 0) throw Quit{kUsage, "--listen wants <addr:port>, got " + listen};
  try {
    std::size_t used = 0;
    auto port = std::stoul(listen.substr(colon + 1), &used);
    if (used != listen.size() - colon - 1 || port > 65535) throw std::out_of_range("port");
    return {listen.substr(0, colon), static_cast<std::uint16_t>(port)};
  } catch (const std::logic_error&) {
    throw Quit{kUsage, "--listen wants <addr:port>, got " + listen};
  }
}

// Removes a scratch directory on scope exit.
struct ScratchDir {
  fs::path path;
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "tenon-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Quit{kFailed, "cannot create a scratch directory"};
    path = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << "\n"; }

// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string listen = "0.0.0.0:7474";
  std::uint16_t announce_port = 7475;
  std::string announce_target = "255.255.255.255";
  bool no_announce = false;
  std::string catalog;
  std::string config;
  std::string mode;
  std::string log;
  std::string assets;
};

int cmd_serve(const ServeArgs& a) {
  auto [address, port] = split_listen(a.listen);
  auto catalog = load_catalog_or_quit(a.catalog);
  auto cfg = load_config_or_quit(a.config, *catalog);
  apply_mode(cfg.pipeline, a.mode);
  if (!a.assets.empty()) cfg.pipeline.asset_dir = a.assets;

  net::ServerOptions o;
  o.address = address;
  o.port = port;
  o.announce = !a.no_announce;
  o.announce_port = a.announce_port;
  o.announce_target = a.announce_target;
  o.log_path = a.log;

  // Block the stop signals before any server thread exists so that only
  // sigwait below sees them.
  sigset_t stop;
  sigemptyset(&stop);
  sigaddset(&stop, SIGINT);
  sigaddset(&stop, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop, nullptr);

  auto backends = pipeline::make_backends(cfg.pipeline, *catalog);
  net::Server server(catalog, cfg.session, cfg.pipeline, std::move(backends), o);
  try {
    server.start();
  } catch (const net::BindError& e) {
    throw Quit{kBind, e.what()};
  }
  std::cout << "tenon listening on ws://" << address << ":" << server.port() << " session '"
            << cfg.session.session_name << "' mode " << (cfg.pipeline.mode == pipeline::Mode::kReal ? "real" : "mock");
  if (o.announce) std::cout << " announce udp/" << o.announce_port;
  std::cout << std::endl;

  int sig = 0;
  sigwait(&stop, &sig);
  const auto digest = server.digest();
  const auto events = server.events().size();
  server.stop();
  std::cout << "stopped after " << events << " events, digest " << to_hex(digest) << std::endl;
  return kOk;
}

int cmd_check_catalog(const std::string& path, bool as_json) {
  auto catalog = load_catalog_or_quit(path, false);
  auto report = harness::check_catalog(*catalog);
  if (as_json) {
    print_json(report.to_json(*catalog));
  } else {
    std::cout << report.text(*catalog);
  }
  return report.ok() ? kOk : kBadCatalog;
}

void write_log(const std::string& path, const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Quit{kFailed, "cannot write " + path};
  for (const auto& e : events) out << event_line(e) << "\n";
}

struct SimulateArgs {
  std::string script;
  std::string catalog;
  std::string config;
  std::string log;
  std::string assets;
  std::string mode;
  bool json = false;
};

int cmd_simulate(const SimulateArgs& a) {
  harness::Script script;
  try {
    script = harness::load_script_file(a.script);
  } catch (const harness::ScriptError& e) {
    throw Quit{kUsage, e.what()};
  }
  const auto catalog_path = a.catalog.empty() ? script.catalog : a.catalog;
  if (catalog_path.empty()) throw Quit{kUsage, "no catalog: pass --catalog or name one in the script"};
  auto catalog = load_catalog_or_quit(catalog_path);
  auto cfg = load_config_or_quit(a.config.empty() ? script.config : a.config, *catalog);
  apply_mode(cfg.pipeline, a.mode);

  std::optional<ScratchDir> scratch;
  if (a.assets.empty()) {
    scratch.emplace();
    cfg.pipeline.asset_dir = (scratch->path / "assets").string();
  } else {
    cfg.pipeline.asset_dir = a.assets;
  }
  harness::SimulationOptions options;
  options.pipeline = cfg.pipeline;
  auto result = harness::simulate(catalog, cfg.session, script, options);

  const auto log = a.log.empty() ? fs::path(a.script).stem().string() + ".ndjson" : a.log;
  write_log(log, result.events);

  if (a.json) {
    nlohmann::ordered_json j{{"digest", to_hex(result.digest)},
                             {"ticks", result.ticks},
                             {"log", log},
                             {"summary", result.summary.to_json()},
                             {"failures", result.failures}};
    print_json(j);
  } else {
    std::cout << "digest: " << to_hex(result.digest) << "\n"
              << "ticks: " << result.ticks << "\n"
              << "log: " << log << "\n"
              << result.summary.text();
    for (const auto& f : result.failures) std::cout << "FAILED " << f << "\n";
  }
  return result.failures.empty() ? kOk : kMismatch;
}

struct ReplayArgs {
  std::string log;
  std::string catalog;
  std::string verify;
  bool json = false;
};

std::vector<Event> read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Quit{kUsage, "cannot read " + path};
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.empty()) throw Quit{kUsage, path + ": empty log"};
  if (text.back() != '\n') throw Quit{kUsage, path + ": truncated (last line has no newline)"};
  std::vector<Event> events;
  std::istringstream lines(text);
  std::string line;
  for (std::size_t n = 1; std::getline(lines, line); ++n) {
    if (line.empty()) continue;
    try {
      events.push_back(parse_event_line(line));
    } catch (const std::exception& e) {
      throw Quit{kUsage, path + ":" + std::to_string(n) + ": " + e.what()};
    }
  }
  return events;
}

int cmd_replay(const ReplayArgs& a) {
  std::optional<std::uint64_t> expected;
  if (!a.verify.empty()) {
    expected = from_hex(a.verify);
    if (!expected) throw Quit{kUsage, "--verify wants 16 hex digits"};
  }
  auto catalog = load_catalog_or_quit(a.catalog);
  auto events = read_log(a.log);
  SessionState state;
  try {
    state = replay(catalog, events);
  } catch (const ReplayError& e) {
    throw Quit{kMismatch, std::string("log does not replay: ") + e.what()};
  } catch (const std::exception& e) {
    throw Quit{kUsage, std::string("log does not replay: ") + e.what()};
  }
  const auto d = digest(state);
  const auto summary = harness::summarize(events);
  if (a.json) {
    nlohmann::ordered_json j{{"digest", to_hex(d)}, {"summary", summary.to_json()}};
    if (expected) j["verified"] = (*expected == d);
    print_json(j);
  } else {
    std::cout << "digest: " << to_hex(d) << "\n" << summary.text();
  }
  if (expected && *expected != d) {
    std::cerr << "digest mismatch: expected " << a.verify << ", replayed " << to_hex(d) << "\n";
    return kMismatch;
  }
  return kOk;
}

int cmd_discover(std::uint16_t port, int window_ms, bool as_json) {
  auto found = net::discover(port, std::chrono::milliseconds(window_ms));
  if (as_json) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& s : found) {
      out.push_back({{"session_name", s.announce.session_name},
                     {"address", s.address},
                     {"host_port", s.announce.host_port},
                     {"protocol_version", s.announce.protocol_version}});
    }
    print_json(out);
  } else {
    for (const auto& s : found) {
      std::cout << s.announce.session_name << "  ws://" << s.address << ":" << s.announce.host_port
                << "  protocol " << s.announce.protocol_version << "\n";
    }
    if (found.empty()) std::cout << "no sessions heard on udp/" << port << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-user hanzi assembly sessions: serve, check catalogs, simulate, replay."};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the session server");
  s->add_option("--listen", serve.listen, "WebSocket address <addr:port>")->capture_default_str();
  s->add_option("--announce-port", serve.announce_port, "UDP port for LAN announcements")->capture_default_str();
  s->add_option("--announce-target", serve.announce_target, "Announcement destination address")
      ->capture_default_str();
  s->add_flag("--no-announce", serve.no_announce, "Do not announce on the LAN");
  s->add_option("--catalog", serve.catalog, "Part catalog JSON")->required();
  s->add_option("--config", serve.config, "Session config JSON");
  s->add_option("--mode", serve.mode, "Generation backends")->check(CLI::IsMember({"mock", "real"}));
  s->add_option("--log", serve.log, "Write the event log (NDJSON) here");
  s->add_option("--assets", serve.assets, "Directory for generated assets");

  std::string catalog_path;
  bool check_json = false;
  auto* c = app.add_subcommand("check-catalog", "Validate a catalog and report fold and reuse statistics");
  c->add_option("catalog", catalog_path, "Part catalog JSON")->required();
  c->add_flag("--json", check_json, "Machine-readable report");

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Drive scripted clients against an in-process server");
  m->add_option("script", sim.script, "Script JSON")->required();
  m->add_option("--catalog", sim.catalog, "Part catalog JSON (overrides the script)");
  m->add_option("--config", sim.config, "Session config JSON (overrides the script)");
  m->add_option("--log", sim.log, "Event log output (default <script>.ndjson)");
  m->add_option("--assets", sim.assets, "Directory for generated assets (default: scratch)");
  m->add_option("--mode", sim.mode, "Generation backends")->check(CLI::IsMember({"mock", "real"}));
  m->add_flag("--json", sim.json, "Machine-readable report");

  ReplayArgs rep;
  auto* r = app.add_subcommand("replay", "Fold an event log and print its digest");
  r->add_option("log", rep.log, "Event log (NDJSON)")->required();
  r->add_option("--catalog", rep.catalog, "Part catalog JSON the log ran on")->required();
  r->add_option("--verify", rep.verify, "Exit 5 unless the digest equals this");
  r->add_flag("--json", rep.json, "Machine-readable report");

  std::uint16_t discover_port = 7475;
  int window_ms = 3000;
  bool discover_json = false;
  auto* d = app.add_subcommand("discover", "List sessions announcing on the LAN");
  d->add_option("--port", discover_port, "UDP port to listen on")->capture_default_str();
  d->add_option("--window", window_ms, "Listen this many milliseconds")->capture_default_str();
  d->add_flag("--json", discover_json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*s) return cmd_serve(serve);
    if (*c) return cmd_check_catalog(catalog_path, check_json);
    if (*m) return cmd_simulate(sim);
    if (*r) return cmd_replay(rep);
    if (*d) return cmd_discover(discover_port, window_ms, discover_json);
  } catch (const Quit& q) {
    std::cerr << "tenon: " << q.message << "\n";
    return q.code;
  } catch (const std::exception& e) {
    std::cerr << "tenon: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
