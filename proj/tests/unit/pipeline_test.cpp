#include <gtest/gtest.h>
#include <httplib.h>

#include <cinttypes>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>
#include <thread>

#include "session_fixture.hpp"
#include "temp_dir.hpp"
#include "tenon/pipeline/jobs.hpp"

using namespace tenon;
using namespace tenon::pipeline;
using namespace tenon::testing;

namespace {

std::string golden(const std::string& name) {
  std::ifstream in(std::string(TENON_GOLDEN_DIR) + "/" + name, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reference FNV-1a 64, written out independently of the library.
std::uint64_t ref_fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

Backends mock_backends(Faults chat = {}, Faults image = {}, Faults model = {}, int ticks = 3) {
  Backends b;
  b.chat = std::make_unique<MockChat>(mini_catalog()->lexicon(), chat);
  b.image = std::make_unique<MockImage>(image);
  b.model3d = std::make_unique<MockModel3D>(ticks, model);
  return b;
}

struct Harness {
  TempDir dir;
  std::vector<PipelineResult> results;
  std::mutex mu;
  JobRunner runner;

  explicit Harness(Backends b, PipelineConfig cfg = {})
      : runner(cfg, std::move(b), std::make_shared<AssetStore>(dir.path() / "assets"), [this](const PipelineResult& r) {
          std::lock_guard lock(mu);
          results.push_back(r);
        }) {}
};

}  // namespace

TEST(Prompts, ExtractMatchesGolden) {
  auto p = build_extract_prompt("a cute cat");
  EXPECT_EQ(p.kind, PromptKind::kChat);
  EXPECT_EQ(p.model_name, "glm-4-flash");
  EXPECT_EQ(p.body, golden("extract_prompt_cute_cat.json"));
  EXPECT_EQ(build_extract_prompt("a cute cat").body, p.body);
}

TEST(Prompts, ImageMatchesGolden) {
  auto p = build_image_prompt("猫");
  EXPECT_EQ(p.kind, PromptKind::kImage);
  EXPECT_EQ(p.model_name, "cogView-4-250304");
  EXPECT_EQ(p.body, golden("image_prompt_cat.json"));
  for (const char* core : {"明", "a very long phrase about sunny weather"}) {
    auto j = nlohmann::json::parse(build_image_prompt(core).body);
    EXPECT_EQ(j.at("size"), "512x512");
  }
}

TEST(Prompts, RejectsEmptyAndOversized) {
  EXPECT_THROW(build_extract_prompt(""), EmptyText);
  EXPECT_THROW(build_extract_prompt(" \t"), EmptyText);
  EXPECT_THROW(build_image_prompt(""), EmptyText);
  EXPECT_THROW(build_extract_prompt(std::string(513, 'a')), std::invalid_argument);
  EXPECT_NO_THROW(build_extract_prompt(std::string(512, 'a')));
}

TEST(Prompts, EscapesQuotesInText) {
  auto j = nlohmann::json::parse(build_extract_prompt(R"(say "cat")").body);
  EXPECT_EQ(j["messages"][0]["content"].get<std::string>().substr(0, 10), R"(say "cat",)");
}

TEST(Extract, MockUsesLongestLexiconKeyword) {
  MockChat chat(mini_catalog()->lexicon());
  EXPECT_EQ(extract_core_character(chat, "a cute cat"), "猫");
  EXPECT_EQ(extract_core_character(chat, "A CUTE KITTEN"), "猫");
  EXPECT_EQ(extract_core_character(chat, "sunny weather today"), "晴");
  EXPECT_EQ(extract_core_character(chat, "a good rest"), "好");  // equal length: first keyword wins
  EXPECT_THROW(extract_core_character(chat, "zzz unknown zzz"), NoLexiconMatch);
  EXPECT_THROW(extract_core_character(chat, "concatenate"), NoLexiconMatch);  // not a whole word
}

TEST(Extract, ReplyMustBeOneCharacter) {
  FixedChat two("小猫");
  EXPECT_THROW(extract_core_character(two, "a cute cat"), NotOneCharacter);
  FixedChat padded("  猫\n");
  EXPECT_EQ(extract_core_character(padded, "a cute cat"), "猫");
  FixedChat empty("   ");
  EXPECT_THROW(extract_core_character(empty, "a cute cat"), NotOneCharacter);
}

TEST(Assets, MockFetchIsStableAndContentAddressed) {
  TempDir dir;
  AssetStore store(dir.path());
  auto a = store.fetch("mock://image/abc", Media::kPng);
  auto b = store.fetch("mock://image/abc", Media::kPng);
  EXPECT_EQ(a, b);
  auto bytes = store.read(a);
  ASSERT_TRUE(bytes);
  EXPECT_EQ(ref_fnv(*bytes), a.bytes_digest);
  EXPECT_EQ(store.path_for(a).filename().string(), hex16(a.bytes_digest) + ".png");
  EXPECT_EQ(bytes->substr(1, 3), "PNG");
  auto glb = store.fetch("mock://model/abc", Media::kGlb);
  EXPECT_EQ(store.read(glb)->substr(0, 4), "glTF");
  EXPECT_EQ(store.path_for(glb).extension(), ".glb");
}

TEST(Assets, MalformedUriIsFetchError) {
  TempDir dir;
  AssetStore store(dir.path());
  EXPECT_THROW(store.fetch("not a uri", Media::kPng), FetchError);
  EXPECT_THROW(store.fetch("ftp://x/y", Media::kPng), FetchError);
  EXPECT_THROW(store.fetch("mock://", Media::kPng), FetchError);
  EXPECT_THROW(store.fetch("file:///definitely/missing.png", Media::kPng), FetchError);
}

TEST(Jobs, ExtractCompletesOnFirstPoll) {
  Harness h(mock_backends());
  auto id = h.runner.submit(req::ExtractCoreCharacter{TaskId("t1"), "a cute cat"});
  EXPECT_EQ(h.runner.jobs().at(0).state, JobState::kSubmitted);
  auto job = h.runner.poll_job(id);
  EXPECT_EQ(job.state, JobState::kComplete);
  EXPECT_EQ(job.attempts, 1);
  ASSERT_EQ(h.results.size(), 1u);
  EXPECT_EQ(std::get<res::CoreCharacterExtracted>(h.results[0]).character, "猫");
  h.runner.poll_job(id);
  EXPECT_EQ(h.results.size(), 1u);  // exactly once
  EXPECT_THROW(h.runner.poll_job("j999"), UnknownJob);
}

TEST(Jobs, ImageUriDerivedFromPromptBody) {
  Harness h(mock_backends());
  auto id = h.runner.submit(req::GenerateImage{TaskId("t1"), "猫"});
  h.runner.poll_job(id);
  ASSERT_EQ(h.results.size(), 1u);
  const auto& ready = std::get<res::ImageReady>(h.results[0]);
  EXPECT_EQ(ready.asset.uri, "mock://image/" + hex16(ref_fnv(golden("image_prompt_cat.json"))));
  EXPECT_EQ(ready.asset.media, Media::kPng);
}

TEST(Jobs, ModelCompletesAfterConfiguredTicks) {
  Harness h(mock_backends({}, {}, {}, 3));
  AssetRef image{"mock://image/x", Media::kPng, 0xD00Dull};
  auto id = h.runner.submit(req::GenerateModel3D{TaskId("t1"), ModelId("m1"), image});
  EXPECT_EQ(h.runner.poll_job(id).state, JobState::kRunning);  // submit
  EXPECT_EQ(h.runner.poll_job(id).state, JobState::kRunning);  // status 1
  EXPECT_EQ(h.runner.poll_job(id).state, JobState::kRunning);  // status 2
  EXPECT_TRUE(h.results.empty());
  EXPECT_EQ(h.runner.poll_job(id).state, JobState::kComplete);  // status 3
  ASSERT_EQ(h.results.size(), 1u);
  const auto& ready = std::get<res::ModelReady>(h.results[0]);
  EXPECT_EQ(ready.asset.uri, "mock://model/000000000000d00d");
  EXPECT_EQ(ready.asset.media, Media::kGlb);
  EXPECT_EQ(ready.model_id, ModelId("m1"));
}

TEST(Jobs, TransientFailuresAreRetried) {
  Harness h(mock_backends(Faults{2, false}));
  auto id = h.runner.submit(req::ExtractCoreCharacter{TaskId("t1"), "a cute cat"});
  EXPECT_EQ(h.runner.poll_job(id).state, JobState::kRunning);
  EXPECT_EQ(h.runner.poll_job(id).state, JobState::kRunning);
  auto job = h.runner.poll_job(id);
  EXPECT_EQ(job.state, JobState::kComplete);
  EXPECT_EQ(job.attempts, 3);
}

TEST(Jobs, PersistentFailureGivesUpAfterMaxRetries) {
  PipelineConfig cfg;
  cfg.max_retries = 2;
  Harness h(mock_backends({}, Faults{0, true}), cfg);
  auto id = h.runner.submit(req::GenerateImage{TaskId("t4"), "猫"});
  for (int i = 0; i < 10; ++i) h.runner.poll_job(id);
  auto job = h.runner.jobs().at(0);
  EXPECT_EQ(job.state, JobState::kFailed);
  EXPECT_EQ(job.attempts, cfg.max_retries + 1);
  ASSERT_EQ(h.results.size(), 1u);
  const auto& f = std::get<res::Failed>(h.results[0]);
  EXPECT_EQ(f.task_id, TaskId("t4"));
  EXPECT_EQ(f.stage, "image");
}

TEST(Jobs, NonTransientFailureIsImmediate) {
  Harness h(mock_backends());
  auto id = h.runner.submit(req::ExtractCoreCharacter{TaskId("t1"), "zzz unknown zzz"});
  auto job = h.runner.poll_job(id);
  EXPECT_EQ(job.state, JobState::kFailed);
  EXPECT_EQ(job.attempts, 1);
  EXPECT_NE(job.reason.find("NoLexiconMatch"), std::string::npos);
}

TEST(Jobs, RealModeBacksOffBetweenRetries) {
  PipelineConfig cfg;
  cfg.mode = Mode::kReal;
  Harness h(mock_backends(Faults{1, false}), cfg);
  auto id = h.runner.submit(req::ExtractCoreCharacter{TaskId("t1"), "a cute cat"});
  EXPECT_EQ(h.runner.poll_job(id).attempts, 1);
  EXPECT_EQ(h.runner.poll_job(id).attempts, 1);  // still inside the 1 s window
  std::this_thread::sleep_for(std::chrono::milliseconds(1050));
  EXPECT_EQ(h.runner.poll_job(id).state, JobState::kComplete);
}

// The engine drives the chain: each result produces the next request.
TEST(Jobs, ChainThroughEngineYieldsThreeResultsInOrder) {
  Harness h(mock_backends());
  Driver d;
  auto submit_all = [&](const Outcome& out) {
    for (const auto& r : out.requests) h.runner.submit(r);
  };
  d.join("alice");
  submit_all(d.send("alice", cmd::Speak{"a cute cat"}));
  std::size_t consumed = 0;
  bool asked_model = false;
  for (int tick = 0; tick < 20; ++tick) {
    h.runner.tick();
    for (; consumed < h.results.size(); ++consumed) submit_all(d.ingest(h.results[consumed]));
    if (!asked_model && d.world().tasks.at(TaskId("t1")).image) {
      submit_all(d.send("alice", cmd::GenerateModel{TaskId("t1")}));
      asked_model = true;
    }
  }
  ASSERT_EQ(h.results.size(), 3u);
  EXPECT_TRUE(std::holds_alternative<res::CoreCharacterExtracted>(h.results[0]));
  EXPECT_TRUE(std::holds_alternative<res::ImageReady>(h.results[1]));
  EXPECT_TRUE(std::holds_alternative<res::ModelReady>(h.results[2]));
  EXPECT_EQ(d.world().models.at(ModelId("m1")).state, ModelState::kUnactivated);
  // Model uri derives from the stored image digest.
  auto image = *d.world().tasks.at(TaskId("t1")).image;
  EXPECT_EQ(d.world().models.at(ModelId("m1")).asset->uri, "mock://model/" + hex16(image.bytes_digest));
}

TEST(Config, ParsesFixturePipelineSection) {
  std::ifstream in(fixture_path("session_mini.json"));
  auto j = nlohmann::json::parse(in);
  auto cfg = pipeline_config_from_json(j.at("pipeline"));
  EXPECT_EQ(cfg.mode, Mode::kMock);
  EXPECT_EQ(cfg.max_retries, 2);
  EXPECT_EQ(cfg.mock_model_ticks, 3);
  EXPECT_EQ(cfg.base_urls.chat, "https://open.bigmodel.cn/api/paas/v4/chat/completions");
  EXPECT_EQ(cfg.retry_backoff().count(), 0);
  EXPECT_THROW(pipeline_config_from_json({{"mode", "psychic"}}), std::invalid_argument);
}

// Real HTTP backends against a loopback fake provider.
class FakeProvider : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      chat_bodies_.push_back(req.body);
      auth_ = req.get_header_value("Authorization");
      if (fail_chat_-- > 0) {
        res.status = 503;
        return;
      }
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":" 猫 "}}]})", "application/json");
    });
    server_.Post("/image", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      image_bodies_.push_back(req.body);
      res.set_content(R"({"data":[{"url":")" + base() + R"(/files/cat.png"}]})", "application/json");
    });
    server_.Get("/files/cat.png", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(std::string("\x89PNG fake bytes", 15), "image/png");
    });
    server_.Post("/task", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      submit_bodies_.push_back(req.body);
      res.set_content(R"({"code":0,"data":{"task_id":"abc"}})", "application/json");
    });
    server_.Get(R"(/task/(\w+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      EXPECT_EQ(req.matches[1], "abc");
      if (++status_polls_ < 2) {
        res.set_content(R"({"code":0,"data":{"status":"running","progress":50}})", "application/json");
      } else {
        res.set_content(R"({"code":0,"data":{"status":"success","output":{"model":")" + base() +
                            R"(/files/cat.glb"}}})",
                        "application/json");
      }
    });
    server_.Get("/files/cat.glb", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("glTF fake", "model/gltf-binary");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_); }

  PipelineConfig config() const {
    PipelineConfig c;
    c.mode = Mode::kReal;
    c.api_key = "sk-test";
    c.base_urls = {base() + "/chat", base() + "/image", base() + "/task", base() + "/task"};
    return c;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::vector<std::string> chat_bodies_, image_bodies_, submit_bodies_;
  std::string auth_;
  int fail_chat_ = 0;
  int status_polls_ = 0;
};

TEST_F(FakeProvider, ChatSendsGoldenBodyAndParsesReply) {
  auto cfg = config();
  HttpChat chat(cfg.base_urls.chat, cfg.api_key);
  EXPECT_EQ(extract_core_character(chat, "a cute cat"), "猫");
  ASSERT_EQ(chat_bodies_.size(), 1u);
  EXPECT_EQ(chat_bodies_[0], golden("extract_prompt_cute_cat.json"));
  EXPECT_EQ(auth_, "Bearer sk-test");
}

TEST_F(FakeProvider, HttpErrorsAreRetriedThenSucceed) {
  fail_chat_ = 1;
  auto cfg = config();
  cfg.mode = Mode::kMock;  // zero backoff, real HTTP backends below
  TempDir dir;
  std::vector<PipelineResult> out;
  Backends b;
  b.chat = std::make_unique<HttpChat>(cfg.base_urls.chat, cfg.api_key);
  JobRunner runner(cfg, std::move(b), std::make_shared<AssetStore>(dir.path()),
                   [&](const PipelineResult& r) { out.push_back(r); });
  auto id = runner.submit(req::ExtractCoreCharacter{TaskId("t1"), "a cute cat"});
  EXPECT_EQ(runner.poll_job(id).state, JobState::kRunning);
  EXPECT_EQ(runner.poll_job(id).state, JobState::kComplete);
  ASSERT_EQ(out.size(), 1u);
}

TEST_F(FakeProvider, ImageAndModelChainOverHttp) {
  auto cfg = config();
  TempDir dir;
  auto store = std::make_shared<AssetStore>(dir.path());
  std::vector<PipelineResult> out;
  Backends b;
  b.image = std::make_unique<HttpImage>(cfg.base_urls.image, cfg.api_key);
  b.model3d = std::make_unique<HttpModel3D>(cfg.base_urls.model3d_submit, cfg.base_urls.model3d_status, cfg.api_key);
  JobRunner runner(cfg, std::move(b), store, [&](const PipelineResult& r) { out.push_back(r); });

  runner.poll_job(runner.submit(req::GenerateImage{TaskId("t1"), "猫"}));
  ASSERT_EQ(out.size(), 1u);
  auto image = std::get<res::ImageReady>(out[0]).asset;
  EXPECT_EQ(image_bodies_.at(0), golden("image_prompt_cat.json"));
  EXPECT_EQ(image.bytes_digest, ref_fnv(std::string("\x89PNG fake bytes", 15)));

  auto id = runner.submit(req::GenerateModel3D{TaskId("t1"), ModelId("m1"), image});
  for (int i = 0; i < 5 && out.size() < 2; ++i) runner.poll_job(id);
  ASSERT_EQ(out.size(), 2u);
  auto submitted = nlohmann::json::parse(submit_bodies_.at(0));
  EXPECT_EQ(submitted["type"], "image_to_model");
  EXPECT_EQ(submitted["file"]["url"], image.uri);
  auto model = std::get<res::ModelReady>(out[1]).asset;
  EXPECT_EQ(model.media, Media::kGlb);
  EXPECT_EQ(*store->read(model), "glTF fake");
}

TEST_F(FakeProvider, UnreachableBackendFails) {
  HttpChat chat("http://127.0.0.1:1/chat", "");
  EXPECT_THROW(chat.complete(build_extract_prompt("cat")), BackendError);
  HttpChat bad_url("nope", "");
  EXPECT_THROW(bad_url.complete(build_extract_prompt("cat")), BackendError);
}
