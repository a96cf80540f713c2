#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tenon/pipeline/assets.hpp"
#include "tenon/pipeline/backends.hpp"
#include "tenon/session/types.hpp"

namespace tenon::pipeline {

enum class Mode { kMock, kReal };

struct PipelineConfig {
  Mode mode = Mode::kMock;
  int max_retries = 2;
  int mock_model_ticks = 3;
  std::string asset_dir = "assets";
  HttpEndpoints base_urls;
  std::string api_key;  // from PIPELINE_API_KEY, never from files

  // Fixed backoff between transport retries: 1 s for real services, none for mocks.
  std::chrono::milliseconds retry_backoff() const {
    return mode == Mode::kReal ? std::chrono::milliseconds(1000) : std::chrono::milliseconds(0);
  }
};

// Reads the "pipeline" object of a session config (absent keys keep defaults)
// and the API key from the environment.
PipelineConfig pipeline_config_from_json(const nlohmann::json& pipeline);

struct Backends {
  std::unique_ptr<ChatBackend> chat;
  std::unique_ptr<ImageBackend> image;
  std::unique_ptr<Model3DBackend> model3d;
};

Backends make_backends(const PipelineConfig& config, const PartCatalog& catalog);

enum class JobKind { kExtract, kImage, kModel3D };
enum class JobState { kSubmitted, kRunning, kComplete, kFailed };

std::string_view to_string(JobKind k);
std::string_view to_string(JobState s);

struct GenerationJob {
  std::string job_id;
  JobKind kind = JobKind::kExtract;
  TaskId task_id;
  JobState state = JobState::kSubmitted;
  int attempts = 0;
  std::string reason;                     // kFailed
  std::optional<PipelineResult> payload;  // kComplete
  bool delivered = false;

  bool terminal() const { return state == JobState::kComplete || state == JobState::kFailed; }
};

class UnknownJob : public std::out_of_range {
 public:
  explicit UnknownJob(const std::string& id) : std::out_of_range("UnknownJob: " + id) {}
};

using ResultSink = std::function<void(const PipelineResult&)>;

// Poll-driven job table. Each poll advances a job by at most one backend
// interaction; a job reaching Complete or Failed hands its result to the sink
// exactly once. Polls may come from several threads: the table is guarded by
// one mutex, backend calls happen outside it, and a job with a call in flight
// is skipped by concurrent polls.
class JobRunner {
 public:
  JobRunner(PipelineConfig config, Backends backends, std::shared_ptr<AssetStore> assets, ResultSink sink);

  std::string submit(const PipelineRequest& request);
  GenerationJob poll_job(const std::string& job_id);

  // Polls every non-terminal job once, in submission order.
  void tick();

  bool busy() const;
  std::vector<GenerationJob> jobs() const;
  const PipelineConfig& config() const noexcept { return config_; }

 private:
  struct Entry {
    GenerationJob job;
    PipelineRequest request;
    std::string remote;  // model3d backend handle once submitted
    bool in_flight = false;
    std::chrono::steady_clock::time_point not_before{};
  };

  struct Step {
    std::optional<PipelineResult> complete;
    std::optional<std::string> remote;
    std::optional<std::string> retryable;  // transport error text
    std::optional<std::string> fatal;
    bool attempted = false;
  };

  Step run_step(const PipelineRequest& request, const std::string& remote);
  PipelineResult failure_of(const GenerationJob& job) const;

  PipelineConfig config_;
  Backends backends_;
  std::shared_ptr<AssetStore> assets_;
  ResultSink sink_;

  mutable std::mutex mu_;
  std::map<std::string, Entry> table_;
  std::vector<std::string> order_;
  std::uint64_t next_id_ = 1;
};

}  // namespace tenon::pipeline
