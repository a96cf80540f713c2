#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "session_fixture.hpp"
#include "temp_dir.hpp"
#include "tenon/pipeline/jobs.hpp"

using namespace tenon;
using namespace tenon::pipeline;
using namespace tenon::testing;

namespace {

struct Deliveries {
  std::map<TaskId, int> delivered;
  std::mutex mu;
};

void check_invariants(const std::vector<GenerationJob>& before, const std::vector<GenerationJob>& after,
                      Deliveries& run, int max_retries) {
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i].terminal()) {
      ASSERT_EQ(after[i].state, before[i].state) << after[i].job_id << " left a terminal state";
      ASSERT_EQ(after[i].attempts, before[i].attempts);
    }
  }
  std::lock_guard lock(run.mu);
  for (const auto& j : after) {
    ASSERT_LE(j.attempts, max_retries + 1) << j.job_id;
    const int n = run.delivered[j.task_id];
    ASSERT_LE(n, 1) << j.job_id << " delivered twice";
    ASSERT_EQ(n, j.terminal() ? 1 : 0) << j.job_id;
  }
}

}  // namespace

// 1,000 random schedules of submits, polls, injected failures and unknown
// ids; a fraction of them poll from two threads at once.
TEST(JobProperty, TerminalStatesStickAndDeliveryIsExactlyOnce) {
  TempDir dir;
  auto store = std::make_shared<AssetStore>(dir.path());
  std::size_t completes = 0, failures = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto faults = [&] { return Faults{pick(0, 4), pick(0, 9) == 0}; };

    PipelineConfig cfg;
    cfg.max_retries = pick(0, 3);
    Backends b;
    b.chat = std::make_unique<MockChat>(mini_catalog()->lexicon(), faults());
    b.image = std::make_unique<MockImage>(faults());
    b.model3d = std::make_unique<MockModel3D>(pick(0, 4), faults());
    Deliveries run;
    JobRunner runner(cfg, std::move(b), store, [&](const PipelineResult& r) {
      std::lock_guard lock(run.mu);
      ++run.delivered[task_of(r)];
    });

    std::vector<std::string> ids;
    int next_task = 1;
    const bool threaded = seed % 10 == 0;
    for (int op = 0; op < 40; ++op) {
      const auto before = runner.jobs();
      const int roll = pick(0, 9);
      if (roll < 3 || ids.empty()) {
        TaskId t("t" + std::to_string(next_task++));
        static const char* texts[] = {"a cute cat", "bright", "zzz", "sunny weather"};
        switch (pick(0, 2)) {
          case 0: ids.push_back(runner.submit(req::ExtractCoreCharacter{t, texts[pick(0, 3)]})); break;
          case 1: ids.push_back(runner.submit(req::GenerateImage{t, "猫"})); break;
          default:
            ids.push_back(runner.submit(req::GenerateModel3D{
                t, ModelId("m1"), AssetRef{"mock://image/x", Media::kPng, std::uint64_t(pick(1, 1 << 20))}}));
        }
      } else if (roll == 9) {
        EXPECT_THROW(runner.poll_job("j-missing"), UnknownJob);
      } else if (threaded) {
        auto id = ids[pick(0, static_cast<int>(ids.size()) - 1)];
        std::thread other([&] { runner.poll_job(id); });
        runner.tick();
        other.join();
      } else {
        runner.poll_job(ids[pick(0, static_cast<int>(ids.size()) - 1)]);
      }
      check_invariants(before, runner.jobs(), run, cfg.max_retries);
      if (HasFatalFailure()) return;
    }
    for (const auto& j : runner.jobs()) {
      completes += j.state == JobState::kComplete;
      failures += j.state == JobState::kFailed;
    }
  }
  EXPECT_GT(completes, 1000u);
  EXPECT_GT(failures, 100u);
}

// Same text and tick schedule, same results, byte for byte.
TEST(JobProperty, MockPipelineIsDeterministic) {
  auto run_once = [] {
    TempDir dir;
    std::vector<std::string> lines;
    Backends b;
    b.chat = std::make_unique<MockChat>(mini_catalog()->lexicon());
    b.image = std::make_unique<MockImage>();
    b.model3d = std::make_unique<MockModel3D>(2);
    Driver d;
    std::vector<PipelineResult> results;
    JobRunner runner({}, std::move(b), std::make_shared<AssetStore>(dir.path()),
                     [&](const PipelineResult& r) { results.push_back(r); });
    d.join("a");
    for (const auto& r : d.send("a", cmd::Speak{"sunny weather"}).requests) runner.submit(r);
    for (const auto& r : d.send("a", cmd::Speak{"a cute cat"}).requests) runner.submit(r);
    std::size_t seen = 0;
    for (int tick = 0; tick < 12; ++tick) {
      runner.tick();
      for (; seen < results.size(); ++seen) {
        for (const auto& r : d.ingest(results[seen]).requests) runner.submit(r);
      }
      for (const auto& [id, task] : d.world().tasks) {
        if (task.image && !task.model) {
          for (const auto& r : d.send("a", cmd::GenerateModel{id}).requests) runner.submit(r);
        }
      }
    }
    for (const auto& e : d.session().log()) lines.push_back(event_line(e));
    return lines;
  };
  auto a = run_once();
  EXPECT_EQ(a, run_once());
  EXPECT_GE(std::count_if(a.begin(), a.end(), [](const auto& l) { return l.find("ModelReady") != std::string::npos; }), 2);
}
