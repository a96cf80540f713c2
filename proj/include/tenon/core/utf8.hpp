#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tenon::utf8 {

// Decodes a UTF-8 string into Unicode scalar values. Returns nullopt on any
// malformed sequence (overlong forms, surrogates, truncation).
std::optional<std::vector<char32_t>> decode(std::string_view text);

std::string encode(char32_t cp);

bool is_valid(std::string_view text);

// Number of scalar values, or nullopt if the text is not valid UTF-8.
std::optional<std::size_t> length(std::string_view text);

// True iff text is exactly one Unicode scalar value.
bool is_single_scalar(std::string_view text);

// Strips ASCII and common Unicode whitespace from both ends.
std::string trim(std::string_view text);

// ASCII-only lowercase; non-ASCII bytes pass through unchanged.
std::string ascii_lower(std::string_view text);

}  // namespace tenon::utf8
