#include "tenon/harness/simulate.hpp"

#include <atomic>
#include <map>

#include "tenon/net/client.hpp"
#include "tenon/net/server.hpp"

namespace tenon::harness {

namespace {

class Run {
 public:
  Run(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config, const SimulationOptions& options)
      : server_(catalog, config, options.pipeline, pipeline::make_backends(options.pipeline, *catalog),
                server_options()) {}

  net::Server& server() { return server_; }
  void set_tick(std::int64_t t) { tick_ = t; }

  void apply(const ScriptStep& step, std::vector<std::string>& failures) {
    const auto& body = *step.command;
    if (const auto* join = std::get_if<cmd::Join>(&body)) {
      if (clients_.contains(step.client)) {
        failures.push_back(where(step) + step.client + " joined twice");
        return;
      }
      connect(step, join->name, failures);
      return;
    }
    auto it = clients_.find(step.client);
    if (it == clients_.end()) {
      if (!connect(step, step.client, failures)) return;
      it = clients_.find(step.client);
    }
    it->second->command(body);
    if (std::holds_alternative<cmd::Leave>(body)) {
      it->second->closed_by_server();
      clients_.erase(it);
      return;
    }
    it->second->sync();
  }

  void hang_up() { clients_.clear(); }

 private:
  net::ServerOptions server_options() {
    net::ServerOptions o;
    o.address = "127.0.0.1";
    o.port = 0;
    o.announce = false;
    o.pipeline_worker = false;
    o.clock = [this] { return tick_.load() * kTickMs; };
    return o;
  }

  static std::string where(const ScriptStep& step) { return "tick " + std::to_string(step.at_tick) + ": "; }

  bool connect(const ScriptStep& step, const std::string& name, std::vector<std::string>& failures) {
    auto c = std::make_unique<net::WireClient>("127.0.0.1", server_.port());
    try {
      c->hello(name);
    } catch (const net::WireError& e) {
      failures.push_back(where(step) + step.client + " refused: " + e.what());
      return false;
    }
    clients_.emplace(step.client, std::move(c));
    return true;
  }

  std::atomic<std::int64_t> tick_{0};
  net::Server server_;
  std::map<std::string, std::unique_ptr<net::WireClient>> clients_;
};

}  // namespace

SimulationResult simulate(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config,
                          const Script& script, const SimulationOptions& options) {
  Run run(catalog, config, options);
  run.server().start();

  SimulationResult result;
  const std::int64_t last = script.steps.empty() ? 0 : script.steps.back().at_tick;
  const std::int64_t end = std::max(last, script.ticks);
  std::size_t next = 0;
  std::int64_t t = 0;
  for (;; ++t) {
    run.set_tick(t);
    run.server().pipeline_tick();
    std::vector<const Expectation*> checks;
    for (; next < script.steps.size() && script.steps[next].at_tick == t; ++next) {
      const auto& step = script.steps[next];
      if (step.expect) {
        checks.push_back(&*step.expect);
      } else {
        run.apply(step, result.failures);
      }
    }
    for (const auto* expect : checks) {
      auto events = run.server().events();
      for (auto& f : check_expectation(*expect, events, run.server().digest())) {
        result.failures.push_back("tick " + std::to_string(t) + ": " + f);
      }
    }
    if (t >= end && !run.server().pipeline_busy()) break;
    if (t >= end + options.settle_limit) {
      result.failures.push_back("pipeline still busy " + std::to_string(options.settle_limit) +
                                " ticks after the last step");
      break;
    }
  }
  // The log ends with the last scripted step; disconnects after it are not
  // part of the run.
  result.ticks = t;
  result.events = run.server().events();
  result.digest = run.server().digest();
  run.server().stop();
  run.hang_up();
  result.summary = summarize(result.events);
  if (script.expect) {
    for (auto& f : check_expectation(*script.expect, result.events, result.digest)) {
      result.failures.push_back("end: " + f);
    }
  }
  return result;
}

}  // namespace tenon::harness
