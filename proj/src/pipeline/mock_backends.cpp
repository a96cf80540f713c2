#include <nlohmann/json.hpp>

#include "tenon/core/hash.hpp"
#include "tenon/core/utf8.hpp"
#include "tenon/pipeline/backends.hpp"

namespace tenon::pipeline {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || (c & 0x80); }

bool injected(const Faults& f, int call) { return f.always || call <= f.fail_first; }

// Recovers the learner's text from a chat prompt body.
std::string utterance(const PromptSpec& prompt) {
  auto body = nlohmann::json::parse(prompt.body);
  std::string content = body.at("messages").at(0).at("content");
  const std::string suffix = ", " + std::string(kExtractInstruction);
  if (content.ends_with(suffix)) content.resize(content.size() - suffix.size());
  return content;
}

}  // namespace

std::string parse_core_character(const std::string& reply) {
  auto t = utf8::trim(reply);
  if (!utf8::is_single_scalar(t)) throw NotOneCharacter(reply);
  return t;
}

std::string extract_core_character(ChatBackend& backend, std::string_view text) {
  return parse_core_character(backend.complete(build_extract_prompt(text)));
}

MockChat::MockChat(std::map<std::string, std::string> lexicon, Faults faults) : faults_(faults) {
  for (auto& [k, v] : lexicon) lexicon_.emplace(utf8::ascii_lower(k), std::move(v));
}

int MockChat::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string MockChat::complete(const PromptSpec& prompt) {
  {
    std::lock_guard lock(mu_);
    if (injected(faults_, ++calls_)) throw BackendError("mock chat: injected failure");
  }
  const std::string text = utf8::ascii_lower(utterance(prompt));
  const std::string* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [word, character] : lexicon_) {
    if (word.size() <= best_len) continue;
    for (auto pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
      const bool left = pos == 0 || !word_char(text[pos - 1]);
      const auto end = pos + word.size();
      const bool right = end == text.size() || !word_char(text[end]);
      if (left && right) {
        best = &character;
        best_len = word.size();
        break;
      }
    }
  }
  if (!best) throw NoLexiconMatch(text);
  return *best;
}

MockImage::MockImage(Faults faults) : faults_(faults) {}

std::string MockImage::generate(const PromptSpec& prompt) {
  {
    std::lock_guard lock(mu_);
    if (injected(faults_, ++calls_)) throw BackendError("mock image: injected failure");
  }
  return "mock://image/" + to_hex(fnv1a64(prompt.body));
}

MockModel3D::MockModel3D(int ticks, Faults faults) : ticks_(ticks), faults_(faults) {}

std::string MockModel3D::submit(const AssetRef& image) {
  std::lock_guard lock(mu_);
  if (injected(faults_, ++calls_)) throw BackendError("mock model3d: injected failure");
  auto handle = "mock-job-" + std::to_string(next_++);
  jobs_[handle] = Job{image.bytes_digest, 0};
  return handle;
}

RemoteStatus MockModel3D::status(const std::string& handle) {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(handle);
  if (it == jobs_.end()) return {RemoteStatus::Phase::kFailed, "", "unknown job " + handle};
  if (++it->second.polls < ticks_) return {};
  return {RemoteStatus::Phase::kDone, "mock://model/" + to_hex(it->second.digest), ""};
}

}  // namespace tenon::pipeline
