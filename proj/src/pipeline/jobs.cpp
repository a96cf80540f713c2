#include "tenon/pipeline/jobs.hpp"

#include <cstdlib>

namespace tenon::pipeline {

using json = nlohmann::json;

std::string_view to_string(JobKind k) {
  switch (k) {
    case JobKind::kExtract: return "Extract";
    case JobKind::kImage: return "Image";
    case JobKind::kModel3D: return "Model3D";
  }
  return "?";
}

std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::kSubmitted: return "Submitted";
    case JobState::kRunning: return "Running";
    case JobState::kComplete: return "Complete";
    case JobState::kFailed: return "Failed";
  }
  return "?";
}

PipelineConfig pipeline_config_from_json(const json& p) {
  PipelineConfig c;
  if (p.is_object()) {
    auto mode = p.value("mode", std::string("mock"));
    if (mode == "real") c.mode = Mode::kReal;
    else if (mode != "mock") throw std::invalid_argument("pipeline.mode must be mock or real, got " + mode);
    c.max_retries = p.value("max_retries", c.max_retries);
    c.mock_model_ticks = p.value("mock_model_ticks", c.mock_model_ticks);
    c.asset_dir = p.value("asset_dir", c.asset_dir);
    if (c.max_retries < 0) throw std::invalid_argument("pipeline.max_retries must be >= 0");
    if (auto it = p.find("base_urls"); it != p.end()) {
      c.base_urls.chat = it->value("chat", "");
      c.base_urls.image = it->value("image", "");
      c.base_urls.model3d_submit = it->value("model3d_submit", "");
      c.base_urls.model3d_status = it->value("model3d_status", "");
    }
  }
  if (const char* key = std::getenv("PIPELINE_API_KEY")) c.api_key = key;
  return c;
}

Backends make_backends(const PipelineConfig& c, const PartCatalog& catalog) {
  Backends b;
  if (c.mode == Mode::kMock) {
    b.chat = std::make_unique<MockChat>(catalog.lexicon());
    b.image = std::make_unique<MockImage>();
    b.model3d = std::make_unique<MockModel3D>(c.mock_model_ticks);
  } else {
    b.chat = std::make_unique<HttpChat>(c.base_urls.chat, c.api_key);
    b.image = std::make_unique<HttpImage>(c.base_urls.image, c.api_key);
    b.model3d = std::make_unique<HttpModel3D>(c.base_urls.model3d_submit, c.base_urls.model3d_status, c.api_key);
  }
  return b;
}

JobRunner::JobRunner(PipelineConfig config, Backends backends, std::shared_ptr<AssetStore> assets, ResultSink sink)
    : config_(std::move(config)), backends_(std::move(backends)), assets_(std::move(assets)), sink_(std::move(sink)) {}

std::string JobRunner::submit(const PipelineRequest& request) {
  std::lock_guard lock(mu_);
  Entry e{GenerationJob{}, request, "", false, {}};
  e.job.job_id = "j" + std::to_string(next_id_++);
  e.job.task_id = task_of(request);
  e.job.kind = std::holds_alternative<req::ExtractCoreCharacter>(request) ? JobKind::kExtract
               : std::holds_alternative<req::GenerateImage>(request)      ? JobKind::kImage
                                                                          : JobKind::kModel3D;
  auto id = e.job.job_id;
  table_.emplace(id, std::move(e));
  order_.push_back(id);
  return id;
}

JobRunner::Step JobRunner::run_step(const PipelineRequest& request, const std::string& remote) {
  Step s;
  try {
    if (const auto* x = std::get_if<req::ExtractCoreCharacter>(&request)) {
      s.attempted = true;
      s.complete = res::CoreCharacterExtracted{x->task_id, extract_core_character(*backends_.chat, x->text)};
    } else if (const auto* im = std::get_if<req::GenerateImage>(&request)) {
      s.attempted = true;
      auto uri = backends_.image->generate(build_image_prompt(im->core));
      s.complete = res::ImageReady{im->task_id, assets_->fetch(uri, Media::kPng)};
    } else {
      const auto& m = std::get<req::GenerateModel3D>(request);
      if (remote.empty()) {
        s.attempted = true;
        s.remote = backends_.model3d->submit(m.image);
      } else {
        auto st = backends_.model3d->status(remote);
        if (st.phase == RemoteStatus::Phase::kFailed) s.fatal = st.reason;
        if (st.phase == RemoteStatus::Phase::kDone)
          s.complete = res::ModelReady{m.task_id, m.model_id, assets_->fetch(st.uri, Media::kGlb)};
      }
    }
  } catch (const BackendError& e) {
    s.attempted = true;
    s.retryable = e.what();
  } catch (const FetchError& e) {
    s.attempted = true;
    s.retryable = e.what();
  } catch (const std::exception& e) {
    // NotOneCharacter, NoLexiconMatch, EmptyText and friends are not transient.
    s.fatal = e.what();
  }
  return s;
}

PipelineResult JobRunner::failure_of(const GenerationJob& job) const {
  static constexpr const char* stage[] = {"extract", "image", "model3d"};
  return res::Failed{job.task_id, stage[static_cast<int>(job.kind)], job.reason};
}

GenerationJob JobRunner::poll_job(const std::string& job_id) {
  PipelineRequest request;
  std::string remote;
  {
    std::lock_guard lock(mu_);
    auto it = table_.find(job_id);
    if (it == table_.end()) throw UnknownJob(job_id);
    auto& e = it->second;
    if (e.job.terminal() || e.in_flight || std::chrono::steady_clock::now() < e.not_before) return e.job;
    e.in_flight = true;
    e.job.state = JobState::kRunning;
    request = e.request;
    remote = e.remote;
  }

  Step s = run_step(request, remote);

  std::optional<PipelineResult> deliver;
  GenerationJob snapshot;
  {
    std::lock_guard lock(mu_);
    auto& e = table_.at(job_id);
    e.in_flight = false;
    if (s.attempted) ++e.job.attempts;
    if (s.remote) e.remote = *s.remote;
    if (s.complete) {
      e.job.state = JobState::kComplete;
      e.job.payload = s.complete;
    } else if (s.fatal) {
      e.job.state = JobState::kFailed;
      e.job.reason = *s.fatal;
    } else if (s.retryable) {
      if (e.job.attempts > config_.max_retries) {
        e.job.state = JobState::kFailed;
        e.job.reason = *s.retryable + " (after " + std::to_string(e.job.attempts) + " attempts)";
      } else {
        e.not_before = std::chrono::steady_clock::now() + config_.retry_backoff();
        // A failed model submit is retried from scratch.
      }
    }
    if (e.job.terminal() && !e.job.delivered) {
      e.job.delivered = true;
      deliver = e.job.state == JobState::kComplete ? *e.job.payload : failure_of(e.job);
    }
    snapshot = e.job;
  }
  if (deliver && sink_) sink_(*deliver);
  return snapshot;
}

void JobRunner::tick() {
  std::vector<std::string> live;
  {
    std::lock_guard lock(mu_);
    for (const auto& id : order_) {
      if (!table_.at(id).job.terminal()) live.push_back(id);
    }
  }
  for (const auto& id : live) poll_job(id);
}

bool JobRunner::busy() const {
  std::lock_guard lock(mu_);
  for (const auto& [id, e] : table_) {
    if (!e.job.terminal()) return true;
  }
  return false;
}

std::vector<GenerationJob> JobRunner::jobs() const {
  std::lock_guard lock(mu_);
  std::vector<GenerationJob> out;
  for (const auto& id : order_) out.push_back(table_.at(id).job);
  return out;
}

}  // namespace tenon::pipeline
