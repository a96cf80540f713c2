#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tenon::pipeline {

inline constexpr std::string_view kChatModel = "glm-4-flash";
inline constexpr std::string_view kImageModel = "cogView-4-250304";
inline constexpr std::string_view kImageSize = "512x512";

// Appended to the learner's utterance as `text + ", " + suffix`.
inline constexpr std::string_view kExtractInstruction =
    "extract the main object described in this sentence, ignore color and other modifiers, "
    "and require the result to be one character";
inline constexpr std::string_view kImageStyle =
    "simple background, no complex environment, solid color background, clear subject";

class EmptyText : public std::invalid_argument {
 public:
  EmptyText() : std::invalid_argument("EmptyText: prompt input is empty") {}
};

enum class PromptKind { kChat, kImage };

struct PromptSpec {
  PromptKind kind = PromptKind::kChat;
  std::string model_name;
  std::string body;  // exact request payload bytes
};

// Throws EmptyText for empty (or whitespace-only) input and
// std::invalid_argument for text beyond 512 characters or invalid UTF-8.
PromptSpec build_extract_prompt(std::string_view text);
PromptSpec build_image_prompt(std::string_view core);

}  // namespace tenon::pipeline
