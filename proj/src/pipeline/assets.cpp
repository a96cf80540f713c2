#include "tenon/pipeline/assets.hpp"

#include <zlib.h>

#include <fstream>
#include <sstream>

#include "http_util.hpp"
#include "tenon/core/hash.hpp"

namespace tenon::pipeline {

namespace fs = std::filesystem;

namespace {

void put_u32be(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void put_u32le(std::string& out, std::uint32_t v) {
  for (int s = 0; s <= 24; s += 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void png_chunk(std::string& out, const char* type, const std::string& data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  std::string td = std::string(type, 4) + data;
  out += td;
  auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(td.data()), static_cast<uInt>(td.size()));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

std::string tiny_png(std::uint64_t seed) {
  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32be(ihdr, 1);
  put_u32be(ihdr, 1);
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB
  png_chunk(out, "IHDR", ihdr);

  const unsigned char raw[4] = {0, static_cast<unsigned char>(seed), static_cast<unsigned char>(seed >> 8),
                                static_cast<unsigned char>(seed >> 16)};
  uLongf len = compressBound(sizeof raw);
  std::string z(len, '\0');
  compress2(reinterpret_cast<Bytef*>(z.data()), &len, raw, sizeof raw, 9);
  z.resize(len);
  png_chunk(out, "IDAT", z);
  png_chunk(out, "IEND", "");
  return out;
}

std::string tiny_glb(std::string_view uri) {
  std::string json = R"({"asset":{"version":"2.0","generator":")" + std::string(uri) + R"("}})";
  while (json.size() % 4) json.push_back(' ');
  std::string out = "glTF";
  put_u32le(out, 2);
  put_u32le(out, static_cast<std::uint32_t>(12 + 8 + json.size()));
  put_u32le(out, static_cast<std::uint32_t>(json.size()));
  out += "JSON";
  out += json;
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FetchError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string mock_asset_bytes(std::string_view uri, Media media) {
  return media == Media::kPng ? tiny_png(fnv1a64(uri)) : tiny_glb(uri);
}

std::string_view extension(Media media) { return media == Media::kPng ? "png" : "glb"; }

AssetStore::AssetStore(fs::path root) : root_(std::move(root)) {}

fs::path AssetStore::path_for(const AssetRef& ref) const {
  return root_ / (to_hex(ref.bytes_digest) + "." + std::string(extension(ref.media)));
}

std::optional<std::string> AssetStore::read(const AssetRef& ref) const {
  auto p = path_for(ref);
  if (!fs::exists(p)) return std::nullopt;
  return read_file(p);
}

AssetRef AssetStore::fetch(const std::string& uri, Media media) {
  std::string bytes;
  if (uri.starts_with("mock://")) {
    if (uri.size() == 7) throw FetchError("malformed uri: " + uri);
    bytes = mock_asset_bytes(uri, media);
  } else if (uri.starts_with("http://") || uri.starts_with("https://")) {
    auto url = parse_url(uri);
    if (!url) throw FetchError("malformed uri: " + uri);
    auto client = make_client(*url);
    auto r = client->Get(url->path);
    if (!r) throw FetchError("GET " + uri + ": " + httplib::to_string(r.error()));
    if (r->status != 200) throw FetchError("GET " + uri + ": HTTP " + std::to_string(r->status));
    bytes = std::move(r->body);
  } else if (uri.starts_with("file://")) {
    bytes = read_file(uri.substr(7));
  } else if (!uri.empty() && uri.front() == '/') {
    bytes = read_file(uri);
  } else {
    throw FetchError("malformed uri: " + uri);
  }

  AssetRef ref{uri, media, fnv1a64(bytes)};
  auto target = path_for(ref);
  if (!fs::exists(target)) {
    fs::create_directories(root_);
    auto tmp = target;
    tmp += ".part";
    {
      std::ofstream out(tmp, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw FetchError("cannot write " + tmp.string());
    }
    fs::rename(tmp, target);
  }
  return ref;
}

}  // namespace tenon::pipeline
