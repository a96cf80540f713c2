#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "tenon/session/types.hpp"

namespace tenon::pipeline {

class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic placeholder bytes for mock:// uris: a valid 1x1 PNG or a
// minimal glTF 2.0 binary, both seeded by the uri.
std::string mock_asset_bytes(std::string_view uri, Media media);

std::string_view extension(Media media);

// Content-addressed store: assets/<digest-hex>.<ext>.
class AssetStore {
 public:
  explicit AssetStore(std::filesystem::path root);

  // Downloads (or synthesizes) the content behind `uri`, stores it and
  // returns a ref carrying the original uri. Idempotent. Supports mock://,
  // file://, plain local paths, http:// and https://.
  AssetRef fetch(const std::string& uri, Media media);

  std::filesystem::path path_for(const AssetRef& ref) const;
  std::optional<std::string> read(const AssetRef& ref) const;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

}  // namespace tenon::pipeline
