#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include "tenon/core/catalog.hpp"
#include "tenon/pipeline/prompts.hpp"
#include "tenon/session/types.hpp"

namespace tenon::pipeline {

// Transport or HTTP-level failure; the job runner retries these.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The reply was well-formed but unusable; not retried.
class NotOneCharacter : public std::runtime_error {
 public:
  explicit NotOneCharacter(const std::string& reply)
      : std::runtime_error("NotOneCharacter: reply \"" + reply + "\" is not exactly one character") {}
};

class NoLexiconMatch : public std::runtime_error {
 public:
  explicit NoLexiconMatch(const std::string& text)
      : std::runtime_error("NoLexiconMatch: no lexicon keyword in \"" + text + "\"") {}
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // Returns the assistant reply text.
  virtual std::string complete(const PromptSpec& prompt) = 0;
};

class ImageBackend {
 public:
  virtual ~ImageBackend() = default;
  // Returns a uri from which the generated image can be fetched.
  virtual std::string generate(const PromptSpec& prompt) = 0;
};

struct RemoteStatus {
  enum class Phase { kRunning, kDone, kFailed } phase = Phase::kRunning;
  std::string uri;     // kDone
  std::string reason;  // kFailed
};

class Model3DBackend {
 public:
  virtual ~Model3DBackend() = default;
  // Returns a backend-side job handle.
  virtual std::string submit(const AssetRef& image) = 0;
  virtual RemoteStatus status(const std::string& handle) = 0;
};

// Trims the reply and insists on exactly one character.
std::string parse_core_character(const std::string& reply);

// build_extract_prompt + backend call + one-character check.
std::string extract_core_character(ChatBackend& backend, std::string_view text);

// --- mocks -------------------------------------------------------------

// Injected failures: the first `fail_first` calls throw BackendError;
// `always` makes every call fail.
struct Faults {
  int fail_first = 0;
  bool always = false;
};

class MockChat final : public ChatBackend {
 public:
  // Lexicon keywords are lowercase; the longest whole-word match wins.
  explicit MockChat(std::map<std::string, std::string> lexicon, Faults faults = {});
  std::string complete(const PromptSpec& prompt) override;
  int calls() const;

 private:
  std::map<std::string, std::string> lexicon_;
  Faults faults_;
  mutable std::mutex mu_;
  int calls_ = 0;
};

// Replies with a fixed string regardless of input (for reply-shape tests).
class FixedChat final : public ChatBackend {
 public:
  explicit FixedChat(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const PromptSpec&) override { return reply_; }

 private:
  std::string reply_;
};

class MockImage final : public ImageBackend {
 public:
  explicit MockImage(Faults faults = {});
  // "mock://image/" + hex(fnv1a64(prompt body)).
  std::string generate(const PromptSpec& prompt) override;

 private:
  Faults faults_;
  std::mutex mu_;
  int calls_ = 0;
};

class MockModel3D final : public Model3DBackend {
 public:
  // Completes after `ticks` status calls with "mock://model/" + hex(image digest).
  explicit MockModel3D(int ticks, Faults faults = {});
  std::string submit(const AssetRef& image) override;
  RemoteStatus status(const std::string& handle) override;

 private:
  struct Job {
    std::uint64_t digest = 0;
    int polls = 0;
  };
  int ticks_;
  Faults faults_;
  std::mutex mu_;
  int calls_ = 0;
  int next_ = 1;
  std::map<std::string, Job> jobs_;
};

// --- real HTTP backends -------------------------------------------------

struct HttpEndpoints {
  std::string chat;
  std::string image;
  std::string model3d_submit;
  std::string model3d_status;
};

class HttpChat final : public ChatBackend {
 public:
  HttpChat(std::string url, std::string api_key);
  std::string complete(const PromptSpec& prompt) override;

 private:
  std::string url_, key_;
};

class HttpImage final : public ImageBackend {
 public:
  HttpImage(std::string url, std::string api_key);
  std::string generate(const PromptSpec& prompt) override;

 private:
  std::string url_, key_;
};

class HttpModel3D final : public Model3DBackend {
 public:
  HttpModel3D(std::string submit_url, std::string status_url, std::string api_key);
  std::string submit(const AssetRef& image) override;
  RemoteStatus status(const std::string& handle) override;

 private:
  std::string submit_url_, status_url_, key_;
};

}  // namespace tenon::pipeline
