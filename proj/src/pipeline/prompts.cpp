#include "tenon/pipeline/prompts.hpp"

#include <nlohmann/json.hpp>

#include "tenon/core/utf8.hpp"

namespace tenon::pipeline {

namespace {

constexpr std::size_t kMaxChars = 512;

void check_input(std::string_view text) {
  if (utf8::trim(text).empty()) throw EmptyText();
  auto n = utf8::length(text);
  if (!n) throw std::invalid_argument("prompt input is not valid UTF-8");
  if (*n > kMaxChars) throw std::invalid_argument("prompt input exceeds 512 characters");
}

}  // namespace

// ordered_json keeps the documented key order; dump() is compact.
PromptSpec build_extract_prompt(std::string_view text) {
  check_input(text);
  nlohmann::ordered_json body;
  body["model"] = kChatModel;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", std::string(text) + ", " + std::string(kExtractInstruction)}}});
  return {PromptKind::kChat, std::string(kChatModel), body.dump()};
}

PromptSpec build_image_prompt(std::string_view core) {
  check_input(core);
  nlohmann::ordered_json body;
  body["model"] = kImageModel;
  body["prompt"] = std::string(core) + ", " + std::string(kImageStyle);
  body["size"] = kImageSize;
  return {PromptKind::kImage, std::string(kImageModel), body.dump()};
}

}  // namespace tenon::pipeline
