#include "pgpt/hub.hpp"

#include <deque>
#include <fstream>
#include <future>
#include <map>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

namespace pgpt::hub {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using SteadyTime = std::chrono::steady_clock::time_point;

using protocol::Frame;
using protocol::MessageKind;

std::string_view to_string(ClientRole role) noexcept {
  switch (role) {
    case ClientRole::Pipeline: return "pipeline";
    case ClientRole::Controller: return "controller";
    case ClientRole::Console: return "console";
  }
  return "?";
}

std::optional<ClientRole> role_from_string(std::string_view name) noexcept {
  if (name == "pipeline") return ClientRole::Pipeline;
  if (name == "controller") return ClientRole::Controller;
  if (name == "console") return ClientRole::Console;
  return std::nullopt;
}

std::optional<ClientRole> destination_for(MessageKind kind) noexcept {
  switch (kind) {
    case MessageKind::SpeechReply:
    case MessageKind::ActionCommand:
    case MessageKind::RePrompt: return ClientRole::Controller;
    case MessageKind::EndFlag:
    case MessageKind::TextInjection: return ClientRole::Pipeline;
    case MessageKind::StateBroadcast: return ClientRole::Console;
    case MessageKind::Register:
    case MessageKind::Heartbeat: return std::nullopt;
  }
  return std::nullopt;
}

std::string_view errc_name(HubErrc code) noexcept {
  switch (code) {
    case HubErrc::BindFailure: return "BindFailure";
    case HubErrc::FirstFrameNotRegister: return "FirstFrameNotRegister";
    case HubErrc::UnknownRole: return "UnknownRole";
    case HubErrc::RoleOccupied: return "RoleOccupied";
  }
  return "Unknown";
}

namespace {

constexpr std::size_t kMaxLineBytes = protocol::kMaxPayloadBytes + 3;

std::string hub_notice(std::uint64_t turn, std::string state) {
  return protocol::encode_frame(protocol::make_frame(MessageKind::StateBroadcast, {turn, "hub", std::move(state)}));
}

}  // namespace

struct Session;

struct Hub::Impl {
  explicit Impl(HubConfig cfg) : config(std::move(cfg)), tcp_acceptor(io), ws_acceptor(io), sweep_timer(io) {}

  void accept_tcp();
  void accept_ws();
  void on_line(const std::shared_ptr<Session>& session, std::string_view line);
  void route(const std::shared_ptr<Session>& from, const Frame& frame, std::string_view line);
  void close_session(Session& session, std::string_view reason);
  void schedule_sweep();
  void sweep();
  void shutdown_all();
  void log_line(const std::string& line);
  void record_route(std::string_view from, std::string_view to, std::string_view line);
  std::chrono::milliseconds sweep_period() const;

  HubConfig config;
  asio::io_context io;
  tcp::acceptor tcp_acceptor;
  tcp::acceptor ws_acceptor;
  asio::steady_timer sweep_timer;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;

  std::map<std::uint64_t, std::shared_ptr<Session>> sessions;
  std::uint64_t next_id = 1;
  std::optional<std::uint64_t> pipeline_id;
  std::optional<std::uint64_t> controller_id;

  std::ofstream log_file;
  std::function<void(const RouteRecord&)> observer;
  std::thread thread;
  bool shut_down = false;
};

struct Session : std::enable_shared_from_this<Session> {
  Session(Hub::Impl& h, std::uint64_t i) : hub(h), id(i), last_rx(std::chrono::steady_clock::now()) {}
  virtual ~Session() = default;

  virtual void start() = 0;
  virtual void write_front() = 0;
  virtual void shutdown_transport() = 0;
  virtual std::string_view transport() const = 0;

  std::string_view role_name() const { return role ? to_string(*role) : std::string_view("unregistered"); }

  // `line` includes the LF terminator.
  void deliver(std::string line) {
    if (closed) return;
    outbox.push_back(std::move(line));
    if (role == ClientRole::Console && outbox.size() > hub.config.observer_outbox_limit) {
      hub.close_session(*this, "observer outbox overflow");
      return;
    }
    if (!writing && ready) begin_write();
  }

  void begin_write() {
    writing = true;
    write_started = std::chrono::steady_clock::now();
    write_front();
  }

  void on_write_done(const beast::error_code& ec) {
    if (closed) return;
    if (ec) {
      hub.close_session(*this, "write failed: " + ec.message());
      return;
    }
    outbox.pop_front();
    if (outbox.empty()) {
      writing = false;
      if (close_after_flush) hub.close_session(*this, "closed after notice");
    } else {
      begin_write();
    }
  }

  void reject(std::string state) {
    deliver(hub_notice(0, std::move(state)));
    close_after_flush = true;
    if (!writing) hub.close_session(*this, "rejected");
  }

  Hub::Impl& hub;
  std::uint64_t id;
  std::optional<ClientRole> role;
  SteadyTime last_rx;
  SteadyTime write_started;
  std::deque<std::string> outbox;
  bool ready = true;
  bool writing = false;
  bool closed = false;
  bool close_after_flush = false;
};

namespace {

struct TcpSession final : Session {
  TcpSession(Hub::Impl& h, std::uint64_t i, tcp::socket s) : Session(h, i), socket(std::move(s)), buffer(kMaxLineBytes) {}

  std::string_view transport() const override { return "tcp"; }

  void start() override { read_next(); }

  void read_next() {
    asio::async_read_until(socket, buffer, '\n',
                           [self = shared_from_this(), this](const beast::error_code& ec, std::size_t n) {
                             if (closed) return;
                             if (ec) {
                               hub.close_session(*this, ec == asio::error::not_found ? "line exceeds frame limit"
                                                                                      : "read: " + ec.message());
                               return;
                             }
                             const auto data = buffer.data();
                             std::string line(asio::buffers_begin(data),
                                              asio::buffers_begin(data) + static_cast<std::ptrdiff_t>(n - 1));
                             buffer.consume(n);
                             hub.on_line(self, line);
                             if (!closed) read_next();
                           });
  }

  void write_front() override {
    asio::async_write(socket, asio::buffer(outbox.front()),
                      [self = shared_from_this(), this](const beast::error_code& ec, std::size_t) { on_write_done(ec); });
  }

  void shutdown_transport() override {
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
    socket.close(ec);
  }

  tcp::socket socket;
  asio::streambuf buffer;
};

struct WsSession final : Session {
  WsSession(Hub::Impl& h, std::uint64_t i, tcp::socket s) : Session(h, i), ws(std::move(s)) { ready = false; }

  std::string_view transport() const override { return "ws"; }

  void start() override {
    http::async_read(ws.next_layer(), buffer, request,
                     [self = shared_from_this(), this](const beast::error_code& ec, std::size_t) { on_request(ec); });
  }

  void on_request(const beast::error_code& ec) {
    if (closed) return;
    if (ec) {
      hub.close_session(*this, "http: " + ec.message());
      return;
    }
    if (!websocket::is_upgrade(request) || request.target() != "/observe") {
      auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request.version());
      res->set(http::field::content_type, "text/plain");
      res->body() = "websocket endpoint is /observe\n";
      res->prepare_payload();
      http::async_write(ws.next_layer(), *res,
                        [self = shared_from_this(), this, res](const beast::error_code&, std::size_t) {
                          hub.close_session(*this, "not a websocket upgrade to /observe");
                        });
      return;
    }
    ws.text(true);
    ws.read_message_max(kMaxLineBytes);
    ws.async_accept(request, [self = shared_from_this(), this](const beast::error_code& aec) {
      if (closed) return;
      if (aec) {
        hub.close_session(*this, "ws accept: " + aec.message());
        return;
      }
      ready = true;
      buffer.consume(buffer.size());
      if (!outbox.empty() && !writing) begin_write();
      read_next();
    });
  }

  void read_next() {
    ws.async_read(buffer, [self = shared_from_this(), this](const beast::error_code& ec, std::size_t) {
      if (closed) return;
      if (ec) {
        hub.close_session(*this, "ws read: " + ec.message());
        return;
      }
      std::string message = beast::buffers_to_string(buffer.data());
      buffer.consume(buffer.size());
      // One frame per message; a trailing LF is tolerated, as are several
      // LF-separated frames in one message.
      std::size_t start = 0;
      while (start < message.size() && !closed) {
        auto nl = message.find('\n', start);
        if (nl == std::string::npos) nl = message.size();
        hub.on_line(self, std::string_view(message).substr(start, nl - start));
        start = nl + 1;
      }
      if (message.empty()) hub.on_line(self, "");
      if (!closed) read_next();
    });
  }

  void write_front() override {
    std::string_view line = outbox.front();
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    ws.async_write(asio::buffer(line.data(), line.size()),
                   [self = shared_from_this(), this](const beast::error_code& ec, std::size_t) { on_write_done(ec); });
  }

  void shutdown_transport() override {
    beast::error_code ec;
    ws.next_layer().shutdown(tcp::socket::shutdown_both, ec);
    ws.next_layer().close(ec);
  }

  websocket::stream<tcp::socket> ws;
  beast::flat_buffer buffer;
  http::request<http::string_body> request;
};

tcp::endpoint resolve(asio::io_context& io, const Endpoint& ep) {
  beast::error_code ec;
  const auto addr = asio::ip::make_address(ep.host, ec);
  if (!ec) return {addr, ep.port};
  tcp::resolver resolver(io);
  auto results = resolver.resolve(ep.host, std::to_string(ep.port), ec);
  if (ec || results.empty()) {
    throw HubError(HubErrc::BindFailure, "cannot resolve " + ep.to_string() + ": " + ec.message());
  }
  return results.begin()->endpoint();
}

void open_listener(tcp::acceptor& acceptor, const tcp::endpoint& endpoint, const std::string& label) {
  beast::error_code ec;
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw HubError(HubErrc::BindFailure, "cannot bind " + label + " listener on " + endpoint.address().to_string() +
                                             ":" + std::to_string(endpoint.port()) + ": " + ec.message());
  }
}

}  // namespace

void Hub::Impl::log_line(const std::string& line) {
  if (log_file.is_open()) {
    log_file << line << '\n';
    log_file.flush();
  }
}

void Hub::Impl::record_route(std::string_view from, std::string_view to, std::string_view line) {
  log_line(std::string(from) + "\t" + std::string(to) + "\t" + std::string(line));
  if (observer) observer(RouteRecord{std::string(from), std::string(to), std::string(line)});
}

void Hub::Impl::accept_tcp() {
  tcp_acceptor.async_accept([this](const beast::error_code& ec, tcp::socket socket) {
    if (ec) {
      if (ec != asio::error::operation_aborted) spdlog::warn("hub: tcp accept failed: {}", ec.message());
      if (!shut_down && tcp_acceptor.is_open()) accept_tcp();
      return;
    }
    beast::error_code opt_ec;
    socket.set_option(tcp::no_delay(true), opt_ec);
    auto session = std::make_shared<TcpSession>(*this, next_id++, std::move(socket));
    sessions.emplace(session->id, session);
    session->start();
    accept_tcp();
  });
}

void Hub::Impl::accept_ws() {
  ws_acceptor.async_accept([this](const beast::error_code& ec, tcp::socket socket) {
    if (ec) {
      if (ec != asio::error::operation_aborted) spdlog::warn("hub: ws accept failed: {}", ec.message());
      if (!shut_down && ws_acceptor.is_open()) accept_ws();
      return;
    }
    auto session = std::make_shared<WsSession>(*this, next_id++, std::move(socket));
    sessions.emplace(session->id, session);
    session->start();
    accept_ws();
  });
}

void Hub::Impl::on_line(const std::shared_ptr<Session>& session, std::string_view line) {
  session->last_rx = std::chrono::steady_clock::now();

  Frame frame;
  try {
    frame = protocol::decode_frame(line);
  } catch (const protocol::ProtocolError& e) {
    if (!session->role) {
      session->reject("error:malformed_frame");
    } else {
      session->deliver(hub_notice(0, "error:malformed_frame"));
    }
    return;
  }

  if (!session->role) {
    if (frame.kind != MessageKind::Register) {
      session->reject("error:first_frame_not_register");
      return;
    }
    protocol::Envelope env;
    try {
      env = protocol::envelope_of(frame);
    } catch (const protocol::ProtocolError&) {
      session->reject("error:malformed_register");
      return;
    }
    const auto role = role_from_string(env.sender);
    if (!role) {
      session->reject("error:unknown_role");
      return;
    }
    auto& slot = *role == ClientRole::Pipeline ? pipeline_id : controller_id;
    if (*role != ClientRole::Console) {
      if (slot) {
        session->reject("error:role_occupied");
        return;
      }
      slot = session->id;
    }
    session->role = role;
    log_line("# register " + std::string(to_string(*role)) + " id=" + std::to_string(session->id) + " via " +
             std::string(session->transport()));
    session->deliver(hub_notice(0, "registered"));
    return;
  }

  if (frame.kind == MessageKind::Register) {
    session->deliver(hub_notice(0, "error:already_registered"));
    return;
  }
  if (frame.kind == MessageKind::Heartbeat) {
    session->deliver(std::string(line) + "\n");
    return;
  }
  route(session, frame, line);
}

void Hub::Impl::route(const std::shared_ptr<Session>& from, const Frame& frame, std::string_view line) {
  const std::string wire = std::string(line) + "\n";
  const auto dest = destination_for(frame.kind);

  // Observer copies go out first so consoles see the frame no later than its
  // destination does.
  std::vector<std::shared_ptr<Session>> consoles;
  for (auto& [id, s] : sessions) {
    if (s->role == ClientRole::Console && s.get() != from.get()) consoles.push_back(s);
  }
  for (auto& c : consoles) c->deliver(wire);

  if (dest == ClientRole::Console) {
    record_route(from->role_name(), "consoles", line);
    return;
  }

  const auto& slot = dest == ClientRole::Pipeline ? pipeline_id : controller_id;
  std::shared_ptr<Session> target;
  if (slot) {
    if (auto it = sessions.find(*slot); it != sessions.end()) target = it->second;
  }
  if (!target) {
    std::uint64_t turn = 0;
    try {
      turn = protocol::envelope_of(frame).turn;
    } catch (const protocol::ProtocolError&) {
    }
    record_route(from->role_name(), "dropped", line);
    from->deliver(hub_notice(turn, "undeliverable"));
    return;
  }
  record_route(from->role_name(), to_string(*dest), line);
  target->deliver(wire);
}

void Hub::Impl::close_session(Session& session, std::string_view reason) {
  if (session.closed) return;
  session.closed = true;
  if (pipeline_id == session.id) pipeline_id.reset();
  if (controller_id == session.id) controller_id.reset();
  log_line("# close " + std::string(session.role_name()) + " id=" + std::to_string(session.id) + " " +
           std::string(reason));
  session.shutdown_transport();
  sessions.erase(session.id);  // may release the last owner; `session` is kept alive by the calling handler
}

std::chrono::milliseconds Hub::Impl::sweep_period() const {
  const auto base = std::min(config.heartbeat_interval, config.write_timeout) / 4;
  return std::clamp(base, std::chrono::milliseconds(10), std::chrono::milliseconds(500));
}

void Hub::Impl::schedule_sweep() {
  sweep_timer.expires_after(sweep_period());
  sweep_timer.async_wait([this](const beast::error_code& ec) {
    if (ec || shut_down) return;
    sweep();
    schedule_sweep();
  });
}

void Hub::Impl::sweep() {
  const auto now = std::chrono::steady_clock::now();
  const auto silence_limit = config.heartbeat_interval * config.missed_heartbeats;
  std::vector<std::pair<std::shared_ptr<Session>, std::string>> victims;
  for (auto& [id, s] : sessions) {
    if (now - s->last_rx > silence_limit) {
      victims.emplace_back(s, "missed heartbeats");
    } else if (s->writing && now - s->write_started > config.write_timeout) {
      victims.emplace_back(s, "write timeout");
    }
  }
  for (auto& [s, why] : victims) close_session(*s, why);
}

void Hub::Impl::shutdown_all() {
  if (shut_down) return;
  shut_down = true;
  beast::error_code ec;
  tcp_acceptor.close(ec);
  ws_acceptor.close(ec);
  sweep_timer.cancel();
  std::vector<std::shared_ptr<Session>> all;
  for (auto& [id, s] : sessions) all.push_back(s);
  for (auto& s : all) close_session(*s, "hub shutdown");
  work.reset();
}

Hub::Hub(HubConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  if (!impl_->config.log_path.empty()) {
    impl_->log_file.open(impl_->config.log_path, std::ios::out | std::ios::trunc);
    if (!impl_->log_file) throw Error("cannot open hub log " + impl_->config.log_path.string());
  }
}

Hub::~Hub() { stop(); }

void Hub::bind(const Endpoint& tcp_ep, const Endpoint& ws_ep) {
  open_listener(impl_->tcp_acceptor, resolve(impl_->io, tcp_ep), "stream");
  open_listener(impl_->ws_acceptor, resolve(impl_->io, ws_ep), "websocket");
  impl_->accept_tcp();
  impl_->accept_ws();
  impl_->schedule_sweep();
  impl_->work.emplace(asio::make_work_guard(impl_->io));
}

std::uint16_t Hub::tcp_port() const { return impl_->tcp_acceptor.local_endpoint().port(); }
std::uint16_t Hub::ws_port() const { return impl_->ws_acceptor.local_endpoint().port(); }

void Hub::run() { impl_->io.run(); }

void Hub::start() {
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

void Hub::stop() {
  if (!impl_) return;
  asio::post(impl_->io, [impl = impl_.get()] { impl->shutdown_all(); });
  if (impl_->thread.joinable()) {
    impl_->thread.join();
  } else if (impl_->io.stopped() || !impl_->work) {
    impl_->io.restart();
    impl_->io.poll();
  }
}

bool Hub::has_client(ClientRole role) {
  std::promise<bool> result;
  auto fut = result.get_future();
  asio::post(impl_->io, [impl = impl_.get(), role, &result] {
    bool found = false;
    for (const auto& [id, s] : impl->sessions) found = found || s->role == role;
    result.set_value(found);
  });
  return fut.get();
}

void Hub::set_route_observer(std::function<void(const RouteRecord&)> observer) {
  asio::post(impl_->io, [impl = impl_.get(), obs = std::move(observer)]() mutable { impl->observer = std::move(obs); });
}

}  // namespace pgpt::hub
