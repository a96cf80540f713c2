#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tenon/harness/report.hpp"
#include "tenon/harness/script.hpp"
#include "tenon/pipeline/jobs.hpp"

namespace tenon::harness {

// Length of one simulated tick; Command::time_ms is tick * kTickMs.
inline constexpr std::int64_t kTickMs = 100;

struct SimulationOptions {
  pipeline::PipelineConfig pipeline;  // asset_dir must be writable
  // Ticks allowed after the last step for outstanding jobs to finish.
  std::int64_t settle_limit = 1000;
};

struct SimulationResult {
  std::vector<Event> events;
  std::uint64_t digest = 0;
  std::int64_t ticks = 0;
  SessionSummary summary;
  std::vector<std::string> failures;  // failed expectations and refused joins
};

// Runs the script against an in-process server on loopback. Each client is a
// real protocol connection; every command waits for the server's pong before
// the next one goes out, so the log order is the script order. The pipeline
// advances one poll per tick.
SimulationResult simulate(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config,
                          const Script& script, const SimulationOptions& options);

}  // namespace tenon::harness
