#include <nlohmann/json.hpp>

#include "http_util.hpp"
#include "tenon/pipeline/backends.hpp"

namespace tenon::pipeline {

using json = nlohmann::json;

namespace {

httplib::Headers auth(const std::string& key) {
  httplib::Headers h;
  if (!key.empty()) h.emplace("Authorization", "Bearer " + key);
  return h;
}

Url require_url(const std::string& s) {
  auto u = parse_url(s);
  if (!u) throw BackendError("bad backend url: " + s);
  return *u;
}

json checked(const httplib::Result& r, const std::string& what) {
  if (!r) throw BackendError(what + ": " + httplib::to_string(r.error()));
  if (r->status < 200 || r->status >= 300)
    throw BackendError(what + ": HTTP " + std::to_string(r->status));
  try {
    return json::parse(r->body);
  } catch (const json::exception& e) {
    throw BackendError(what + ": unparsable reply: " + e.what());
  }
}

json post_json(const std::string& url, const std::string& key, const std::string& body, const std::string& what) {
  auto u = require_url(url);
  auto client = make_client(u);
  return checked(client->Post(u.path, auth(key), body, "application/json"), what);
}

template <typename F>
auto dig(const json& j, const std::string& what, F&& f) {
  try {
    return f(j);
  } catch (const json::exception& e) {
    throw BackendError(what + ": unexpected reply shape: " + e.what());
  }
}

}  // namespace

HttpChat::HttpChat(std::string url, std::string api_key) : url_(std::move(url)), key_(std::move(api_key)) {}

std::string HttpChat::complete(const PromptSpec& prompt) {
  auto j = post_json(url_, key_, prompt.body, "chat");
  return dig(j, "chat", [](const json& r) { return r.at("choices").at(0).at("message").at("content").get<std::string>(); });
}

HttpImage::HttpImage(std::string url, std::string api_key) : url_(std::move(url)), key_(std::move(api_key)) {}

std::string HttpImage::generate(const PromptSpec& prompt) {
  auto j = post_json(url_, key_, prompt.body, "image");
  return dig(j, "image", [](const json& r) { return r.at("data").at(0).at("url").get<std::string>(); });
}

HttpModel3D::HttpModel3D(std::string submit_url, std::string status_url, std::string api_key)
    : submit_url_(std::move(submit_url)), status_url_(std::move(status_url)), key_(std::move(api_key)) {}

std::string HttpModel3D::submit(const AssetRef& image) {
  nlohmann::ordered_json body;
  body["type"] = "image_to_model";
  body["file"] = {{"type", "png"}, {"url", image.uri}};
  auto j = post_json(submit_url_, key_, body.dump(), "model3d submit");
  return dig(j, "model3d submit", [](const json& r) { return r.at("data").at("task_id").get<std::string>(); });
}

RemoteStatus HttpModel3D::status(const std::string& handle) {
  auto u = require_url(status_url_);
  auto path = u.path;
  if (!path.ends_with("/")) path += "/";
  auto client = make_client(u);
  auto j = checked(client->Get(path + handle, auth(key_)), "model3d status");
  return dig(j, "model3d status", [](const json& r) {
    const auto& data = r.at("data");
    const auto st = data.at("status").get<std::string>();
    if (st == "success") {
      const auto& out = data.at("output");
      auto uri = out.contains("model") ? out.at("model") : out.at("pbr_model");
      return RemoteStatus{RemoteStatus::Phase::kDone, uri.get<std::string>(), ""};
    }
    if (st == "failed" || st == "cancelled" || st == "banned" || st == "expired")
      return RemoteStatus{RemoteStatus::Phase::kFailed, "", "remote status " + st};
    return RemoteStatus{};
  });
}

}  // namespace tenon::pipeline
