#include "tenon/net/client.hpp"

#include <sys/socket.h>
#include <sys/time.h>

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include "tenon/session/codec.hpp"

namespace tenon::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

struct WireClient::Impl {
  asio::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};
  beast::flat_buffer buffer;
};

WireClient::WireClient(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->ioc);
  asio::connect(impl_->ws.next_layer(), resolver.resolve(host, std::to_string(port)));
  impl_->ws.next_layer().set_option(tcp::no_delay(true));
  // Blocking reads give up after `timeout` instead of hanging a test.
  timeval tv{};
  tv.tv_sec = timeout.count() / 1000;
  tv.tv_usec = (timeout.count() % 1000) * 1000;
  ::setsockopt(impl_->ws.next_layer().native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  impl_->ws.set_option(websocket::stream_base::decorator(
      [](websocket::request_type& req) { req.set(beast::http::field::user_agent, "tenon-wire-client"); }));
  impl_->ws.handshake(host + ":" + std::to_string(port), "/");
  impl_->ws.text(true);
}

WireClient::~WireClient() {
  try {
    close();
  } catch (...) {
  }
}

std::int64_t WireClient::send(const std::string& type, json payload) {
  auto seq = next_seq_++;
  send_text(encode(Envelope{seq, type, std::move(payload)}));
  return seq;
}

std::int64_t WireClient::command(const CommandBody& body) { return send("command", command_to_json(body)); }

void WireClient::send_text(const std::string& text) { impl_->ws.write(asio::buffer(text)); }

Envelope WireClient::read() {
  impl_->buffer.clear();
  impl_->ws.read(impl_->buffer);
  auto text = beast::buffers_to_string(impl_->buffer.data());
  auto env = decode(text);
  if (!env) throw std::runtime_error("server sent a malformed frame: " + text);
  if (env->type == "event") event_frames_.push_back(text);
  if (env->type == "error") errors_.push_back(*env);
  return *env;
}

Welcome WireClient::hello(const std::string& name, std::optional<UserId> resume) {
  send("hello", hello_payload(Hello{kProtocolVersion, name, std::move(resume)}));
  for (;;) {
    auto env = read();
    if (env.type == "error") {
      throw WireError(env.payload.value("code", ""), env.payload.value("message", ""));
    }
    if (env.type == "welcome") {
      welcome_ = parse_welcome(env.payload);
      return *welcome_;
    }
  }
}

std::vector<Envelope> WireClient::sync() {
  auto seq = send("ping", json::object());
  std::vector<Envelope> seen;
  for (;;) {
    auto env = read();
    if (env.type == "pong" && env.payload.value("echo", std::int64_t{-1}) == seq) return seen;
    if (env.type == "error") {
      throw WireError(env.payload.value("code", ""), env.payload.value("message", ""));
    }
    seen.push_back(std::move(env));
  }
}

bool WireClient::closed_by_server() {
  try {
    for (;;) read();
  } catch (const beast::system_error& e) {
    return e.code() == websocket::error::closed || e.code() == asio::error::eof ||
           e.code() == asio::error::connection_reset;
  }
}

void WireClient::close() {
  if (!impl_->ws.is_open()) return;
  beast::error_code ec;
  impl_->ws.close(websocket::close_code::normal, ec);
  // Drain until the close frame comes back (or the socket dies).
  while (!ec) {
    impl_->buffer.clear();
    impl_->ws.read(impl_->buffer, ec);
  }
}

SessionState fold_view(std::shared_ptr<const PartCatalog> catalog, const Welcome& welcome,
                       const std::vector<std::string>& event_frames) {
  auto state = state_from_snapshot(std::move(catalog), welcome.world, welcome.presence);
  for (const auto& frame : event_frames) {
    auto env = decode(frame);
    if (!env) throw CodecError("bad event frame");
    auto e = event_from_json(env->payload);
    if (e.seq <= welcome.event_seq) continue;
    apply_event(state, e);
  }
  return state;
}

}  // namespace tenon::net
