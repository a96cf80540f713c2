#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tenon/session/types.hpp"

namespace tenon {

// Pose updates closer together than this (per user) are dropped.
inline constexpr std::int64_t kPoseThrottleMs = 100;
// A Checkpoint event occupies every event_seq slot divisible by this.
inline constexpr std::uint64_t kCheckpointInterval = 50;
inline constexpr std::size_t kMaxSpeakChars = 512;

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// What one engine step produced. `requests` are side effects for the
// generation pipeline; the engine performs none itself.
struct Outcome {
  std::vector<Event> events;
  std::vector<PipelineRequest> requests;
};

struct SessionStart {
  SessionState state;
  Event genesis;  // SessionCreated, seq 1
};

SessionStart create_session(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config);

// Applies one command in place. Rejections become Error events; they never
// touch World, only the log position and seq bookkeeping.
Outcome handle_command(SessionState& state, const Command& command);

Outcome ingest_pipeline_result(SessionState& state, const PipelineResult& result);

// The single mutation path. Throws ReplayError if the event does not fit
// (sequence gap, dangling ids, checkpoint digest mismatch).
void apply_event(SessionState& state, const Event& event);

struct Snapshot {
  std::string bytes;  // canonical serialization of World
  std::uint64_t digest = 0;
};

Snapshot snapshot(const SessionState& state);
std::uint64_t digest(const SessionState& state);

// Folds a complete log (starting with SessionCreated) into a fresh state.
// The SessionCreated event must match `config` and the catalog digest.
SessionState replay(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config,
                    std::span<const Event> events);

// Same, taking the config from the log's SessionCreated event.
SessionState replay(std::shared_ptr<const PartCatalog> catalog, std::span<const Event> events);

// Restores a state from a welcome snapshot (world JSON + presence JSON).
SessionState state_from_snapshot(std::shared_ptr<const PartCatalog> catalog, const World& world,
                                 const Presence& presence);

// Convenience owner: state plus the full event log and an outbox of
// pipeline requests. Not thread-safe; callers serialize access.
class Session {
 public:
  Session(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config);

  Outcome handle(const Command& command);
  Outcome ingest(const PipelineResult& result);

  const SessionState& state() const noexcept { return state_; }
  const std::vector<Event>& log() const noexcept { return log_; }
  const SessionConfig& config() const noexcept { return config_; }
  std::uint64_t digest() const { return tenon::digest(state_); }

 private:
  void record(const Outcome& out);

  SessionConfig config_;
  SessionState state_;
  std::vector<Event> log_;
};

// Helpers for readers of the state.
std::optional<UserId> current_host(const World& world);
std::size_t present_users(const World& world);
std::vector<InstanceId> held_by(const World& world, const UserId& user);

}  // namespace tenon
