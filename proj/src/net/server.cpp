#include "tenon/net/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include <condition_variable>
#include <deque>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <regex>
#include <thread>

#include "tenon/net/protocol.hpp"
#include "tenon/session/codec.hpp"

namespace tenon::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using udp = asio::ip::udp;
using json = nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

namespace {

// Past this many unsent frames a client is considered gone.
constexpr std::size_t kMaxQueuedFrames = 20000;

}  // namespace

class Connection;

struct Server::Impl {
  Impl(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config, pipeline::PipelineConfig pcfg,
       pipeline::Backends backends, ServerOptions opts);

  void start();
  void stop();

  template <typename F>
  auto on_io(F&& f) -> decltype(f()) {
    if (!running) return f();
    using R = decltype(f());
    auto task = std::make_shared<std::packaged_task<R()>>(std::forward<F>(f));
    auto fut = task->get_future();
    asio::post(ioc, [task] { (*task)(); });
    return fut.get();
  }

  std::int64_t now_ms() const { return options.clock(); }

  // I/O thread only.
  void do_accept();
  void on_open(const std::shared_ptr<Connection>& c);
  void on_message(const std::shared_ptr<Connection>& c, const std::string& text);
  void on_close(const std::shared_ptr<Connection>& c);
  void on_hello(const std::shared_ptr<Connection>& c, const Envelope& env);
  void on_command(const std::shared_ptr<Connection>& c, const Envelope& env);
  void send(const std::shared_ptr<Connection>& c, const std::string& type, json payload);
  void fail(const std::shared_ptr<Connection>& c, const char* code, const std::string& message, bool close);
  void publish(const Outcome& out);
  void schedule_announce();
  void schedule_idle_check();
  UserId fresh_user_id();

  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  udp::socket announce_socket{ioc};
  asio::steady_timer announce_timer{ioc};
  asio::steady_timer idle_timer{ioc};

  ServerOptions options;
  pipeline::PipelineConfig pipeline_config;
  std::shared_ptr<pipeline::AssetStore> assets;
  std::unique_ptr<pipeline::JobRunner> runner;
  Session session;
  std::ofstream log;
  bool announce_warned = false;

  std::map<Connection*, std::shared_ptr<Connection>> conns;
  std::map<UserId, SteadyClock::time_point> departed;
  std::uint64_t next_user = 1;

  std::thread io_thread;
  std::thread worker;
  std::mutex worker_mu;
  std::condition_variable worker_cv;
  bool worker_stop = false;
  std::atomic<bool> running{false};
  std::uint16_t bound_port = 0;
  SteadyClock::time_point started = SteadyClock::now();
};

// One accepted TCP connection: either a WebSocket client or a one-shot
// HTTP request for a stored asset.
class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server::Impl& host) : ws_(std::move(socket)), host_(host) {}

  void start() {
    http::async_read(ws_.next_layer(), buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  void send(std::shared_ptr<const std::string> frame) {
    if (closed_) return;
    if (queue_.size() >= kMaxQueuedFrames) {
      // Not inline: the caller may be iterating the connection table.
      asio::post(ws_.get_executor(), [self = shared_from_this()] { self->drop(); });
      return;
    }
    queue_.push_back(std::move(frame));
    if (queue_.size() == 1) write_next();
  }

  // Flushes queued frames, then closes.
  void close_after_flush() {
    closing_ = true;
    if (queue_.empty()) close_now();
  }

  // Immediate teardown (idle timeout, slow consumer).
  void drop() {
    if (closed_) return;
    host_.on_close(shared_from_this());
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  bool mark_closed() {
    if (closed_) return false;
    closed_ = true;
    return true;
  }

  std::int64_t expected_seq = 1;
  std::optional<UserId> user;
  SteadyClock::time_point last_activity = SteadyClock::now();

 private:
  void on_request(beast::error_code ec) {
    if (ec) return;
    if (websocket::is_upgrade(request_)) {
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) {
        if (ec) return;
        self->host_.on_open(self);
        self->read();
      });
      return;
    }
    serve_http();
  }

  void serve_http() {
    static const std::regex asset(R"(^/assets/([0-9a-f]{16})\.(png|glb)$)");
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(request_.version());
    res->keep_alive(false);
    std::string target(request_.target());
    std::smatch m;
    if (request_.method() == http::verb::get && target == "/healthz") {
      res->result(http::status::ok);
      res->set(http::field::content_type, "text/plain");
      res->body() = "ok\n";
    } else if (request_.method() == http::verb::get && std::regex_match(target, m, asset)) {
      std::ifstream in(host_.assets->root() / target.substr(8), std::ios::binary);
      if (in) {
        res->result(http::status::ok);
        res->set(http::field::content_type, m[2] == "png" ? "image/png" : "model/gltf-binary");
        res->set(http::field::access_control_allow_origin, "*");
        res->body().assign(std::istreambuf_iterator<char>(in), {});
      } else {
        res->result(http::status::not_found);
      }
    } else {
      res->result(http::status::not_found);
    }
    res->prepare_payload();
    http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ec;
      self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  void read() {
    ws_.async_read(read_buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t n) {
      if (ec) {
        self->host_.on_close(self);
        return;
      }
      auto text = beast::buffers_to_string(self->read_buffer_.data());
      self->read_buffer_.consume(n);
      self->host_.on_message(self, text);
      if (!self->closed_ && !self->closing_) self->read();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->drop();
      self->queue_.pop_front();
      if (!self->queue_.empty()) return self->write_next();
      if (self->closing_) self->close_now();
    });
  }

  void close_now() {
    host_.on_close(shared_from_this());
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& host_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  beast::flat_buffer read_buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool closing_ = false;
  bool closed_ = false;
};

Server::Impl::Impl(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config,
                   pipeline::PipelineConfig pcfg, pipeline::Backends backends, ServerOptions opts)
    : options(std::move(opts)),
      pipeline_config(std::move(pcfg)),
      assets(std::make_shared<pipeline::AssetStore>(pipeline_config.asset_dir)),
      session(std::move(catalog), config) {
  if (!options.clock) {
    options.clock = [this] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(SteadyClock::now() - started).count();
    };
  }
  runner = std::make_unique<pipeline::JobRunner>(pipeline_config, std::move(backends), assets,
                                                 [this](const PipelineResult& r) {
                                                   asio::post(ioc, [this, r] { publish(session.ingest(r)); });
                                                 });
}

void Server::Impl::start() {
  try {
    tcp::endpoint ep(asio::ip::make_address(options.address), options.port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen(asio::socket_base::max_listen_connections);
    bound_port = acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw BindError("cannot listen on " + options.address + ":" + std::to_string(options.port) + ": " +
                    e.code().message());
  }

  if (!options.log_path.empty()) {
    log.open(options.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write event log " + options.log_path);
    for (const auto& e : session.log()) log << event_line(e) << '\n';
    log.flush();
  }

  do_accept();
  if (options.announce) {
    beast::error_code ec;
    announce_socket.open(udp::v4(), ec);
    if (!ec) announce_socket.set_option(asio::socket_base::broadcast(true), ec);
    if (ec) std::clog << "announce disabled: " << ec.message() << '\n';
    else {
      announce_timer.expires_after(std::chrono::milliseconds(0));
      schedule_announce();
    }
  }
  schedule_idle_check();

  running = true;
  io_thread = std::thread([this] { ioc.run(); });
  if (options.pipeline_worker) {
    worker = std::thread([this] {
      std::unique_lock lock(worker_mu);
      while (!worker_stop) {
        lock.unlock();
        runner->tick();
        lock.lock();
        worker_cv.wait_for(lock, options.pipeline_interval, [this] { return worker_stop; });
      }
    });
  }
}

void Server::Impl::stop() {
  if (!running) return;
  {
    std::lock_guard lock(worker_mu);
    worker_stop = true;
  }
  worker_cv.notify_all();
  if (worker.joinable()) worker.join();
  asio::post(ioc, [this] {
    beast::error_code ec;
    acceptor.close(ec);
    announce_socket.close(ec);
    announce_timer.cancel();
    idle_timer.cancel();
    auto all = conns;
    for (auto& [p, c] : all) c->drop();
  });
  // Let the close handlers run, then stop.
  asio::post(ioc, [this] { ioc.stop(); });
  if (io_thread.joinable()) io_thread.join();
  running = false;
}

void Server::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    // Frames are small and latency-bound; do not let Nagle batch them.
    beast::error_code ignored;
    socket.set_option(tcp::no_delay(true), ignored);
    std::make_shared<Connection>(std::move(socket), *this)->start();
    do_accept();
  });
}

void Server::Impl::schedule_announce() {
  announce_timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    Announce a;
    a.session_name = session.config().session_name;
    a.host_port = bound_port;
    const auto datagram = encode_announce(a);
    beast::error_code send_ec;
    udp::endpoint to(asio::ip::make_address(options.announce_target, send_ec), options.announce_port);
    if (!send_ec) announce_socket.send_to(asio::buffer(datagram), to, 0, send_ec);
    if (send_ec && !announce_warned) {
      std::clog << "announce failed (direct connect still works): " << send_ec.message() << '\n';
      announce_warned = true;
    }
    announce_timer.expires_after(options.announce_interval);
    schedule_announce();
  });
}

void Server::Impl::schedule_idle_check() {
  auto period = std::min<std::chrono::milliseconds>(std::chrono::milliseconds(1000), options.idle_timeout / 4);
  if (period.count() <= 0) period = std::chrono::milliseconds(10);
  idle_timer.expires_after(period);
  idle_timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    auto now = SteadyClock::now();
    std::vector<std::shared_ptr<Connection>> stale;
    for (auto& [p, c] : conns) {
      if (now - c->last_activity > options.idle_timeout) stale.push_back(c);
    }
    for (auto& c : stale) c->drop();
    schedule_idle_check();
  });
}

void Server::Impl::on_open(const std::shared_ptr<Connection>& c) { conns.emplace(c.get(), c); }

void Server::Impl::send(const std::shared_ptr<Connection>& c, const std::string& type, json payload) {
  c->send(std::make_shared<const std::string>(encode(
      Envelope{static_cast<std::int64_t>(session.state().presence.event_seq), type, std::move(payload)})));
}

void Server::Impl::fail(const std::shared_ptr<Connection>& c, const char* code, const std::string& message,
                        bool close) {
  send(c, "error", json{{"code", code}, {"message", message}});
  if (close) c->close_after_flush();
}

void Server::Impl::on_message(const std::shared_ptr<Connection>& c, const std::string& text) {
  c->last_activity = SteadyClock::now();
  auto env = decode(text);
  if (!env) return fail(c, wire_codes::kMalformed, "frame is not a {seq, type, payload} object", true);
  if (env->seq != c->expected_seq) {
    return fail(c, wire_codes::kBadSeq,
                "expected seq " + std::to_string(c->expected_seq) + ", got " + std::to_string(env->seq), false);
  }
  ++c->expected_seq;
  if (env->type == "hello") return on_hello(c, *env);
  if (env->type == "command") return on_command(c, *env);
  if (env->type == "ping") return send(c, "pong", json{{"echo", env->seq}});
  fail(c, wire_codes::kMalformed, "unknown message type " + env->type, true);
}

UserId Server::Impl::fresh_user_id() {
  const auto& users = session.state().world.users;
  for (;;) {
    UserId id("u" + std::to_string(next_user++));
    if (!users.contains(id)) return id;
  }
}

void Server::Impl::on_hello(const std::shared_ptr<Connection>& c, const Envelope& env) {
  if (c->user) return fail(c, wire_codes::kMalformed, "duplicate hello", true);
  auto hello = parse_hello(env.payload);
  if (!hello) return fail(c, wire_codes::kMalformed, "hello needs integer protocol_version", true);
  if (hello->protocol_version != kProtocolVersion) {
    return fail(c, wire_codes::kVersionMismatch,
                "server speaks protocol " + std::to_string(kProtocolVersion) + ", client sent " +
                    std::to_string(hello->protocol_version),
                true);
  }
  const auto& world = session.state().world;
  UserId uid;
  if (hello->resume_user_id) {
    const auto& want = *hello->resume_user_id;
    auto u = world.users.find(want);
    auto gone = departed.find(want);
    if (u != world.users.end() && u->second.present)
      return fail(c, wire_codes::kMalformed, "user " + want.str() + " is already connected", true);
    if (u != world.users.end() && gone != departed.end() &&
        SteadyClock::now() - gone->second <= options.resume_window)
      uid = want;
  }
  if (uid.empty()) uid = fresh_user_id();
  if (static_cast<int>(present_users(world)) >= world.max_users)
    return fail(c, wire_codes::kSessionFull, "session has " + std::to_string(world.max_users) + " users", true);

  std::string name = hello->name.empty() ? uid.str() : hello->name;
  auto out = session.handle(Command{uid, env.seq, now_ms(), Origin::kClient, cmd::Join{name}});
  publish(out);
  const auto& users = session.state().world.users;
  auto joined = users.find(uid);
  if (joined == users.end() || !joined->second.present) {
    return fail(c, wire_codes::kMalformed, "join rejected", true);
  }
  c->user = uid;
  departed.erase(uid);
  send(c, "welcome", welcome_payload(uid, joined->second.role, session.state()));
}

void Server::Impl::on_command(const std::shared_ptr<Connection>& c, const Envelope& env) {
  if (!c->user) return fail(c, wire_codes::kMalformed, "command before hello", true);
  CommandBody body;
  try {
    body = command_from_json(env.payload);
  } catch (const CodecError& e) {
    return fail(c, wire_codes::kMalformed, e.what(), true);
  }
  if (std::holds_alternative<cmd::Join>(body)) return fail(c, wire_codes::kMalformed, "join happens via hello", true);
  const UserId user = *c->user;
  publish(session.handle(Command{user, env.seq, now_ms(), Origin::kClient, body}));
  if (std::holds_alternative<cmd::Leave>(body)) {
    auto u = session.state().world.users.find(user);
    if (u != session.state().world.users.end() && !u->second.present) {
      departed[user] = SteadyClock::now();
      c->user.reset();
      c->close_after_flush();
    }
  }
}

void Server::Impl::on_close(const std::shared_ptr<Connection>& c) {
  if (!c->mark_closed()) return;
  conns.erase(c.get());
  if (!c->user) return;
  const UserId user = *c->user;
  c->user.reset();
  auto u = session.state().world.users.find(user);
  if (u == session.state().world.users.end() || !u->second.present) return;
  // Disconnect without Leave: the server leaves on the user's behalf.
  publish(session.handle(Command{user, 0, now_ms(), Origin::kServer, cmd::Leave{}}));
  departed[user] = SteadyClock::now();
}

void Server::Impl::publish(const Outcome& out) {
  for (const auto& e : out.events) {
    if (log.is_open()) log << event_line(e) << '\n';
    auto frame = std::make_shared<const std::string>(event_frame(e));
    for (auto& [p, c] : conns) {
      if (c->user) c->send(frame);
    }
  }
  if (log.is_open()) log.flush();
  for (const auto& r : out.requests) runner->submit(r);
}

Server::Server(std::shared_ptr<const PartCatalog> catalog, const SessionConfig& config,
               pipeline::PipelineConfig pipeline_config, pipeline::Backends backends, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(catalog), config, std::move(pipeline_config), std::move(backends),
                                   std::move(options))) {}

Server::~Server() { stop(); }

void Server::start() { impl_->start(); }
void Server::stop() { impl_->stop(); }
std::uint16_t Server::port() const { return impl_->bound_port; }

std::uint64_t Server::digest() {
  return impl_->on_io([this] { return impl_->session.digest(); });
}

std::vector<Event> Server::events() {
  return impl_->on_io([this] { return impl_->session.log(); });
}

SessionState Server::state() {
  return impl_->on_io([this] { return impl_->session.state(); });
}

std::size_t Server::connections() {
  return impl_->on_io([this] { return impl_->conns.size(); });
}

void Server::pipeline_tick() {
  impl_->runner->tick();
  // Results were posted before this barrier; once it runs they are applied.
  impl_->on_io([] { return 0; });
}

bool Server::pipeline_busy() const { return impl_->runner->busy(); }

}  // namespace tenon::net
