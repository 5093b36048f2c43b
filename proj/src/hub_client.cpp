#include "pgpt/hub_client.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

namespace pgpt::hub {

using protocol::Frame;
using protocol::MessageKind;

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon + 1 >= text.size()) {
    throw Error("expected HOST:PORT, got '" + std::string(text) + "'");
  }
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  if (ep.host.empty()) throw Error("missing host in '" + std::string(text) + "'");
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port > 65535) {
    throw Error("invalid port in '" + std::string(text) + "'");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

std::unique_ptr<HubClient> HubClient::connect(const Endpoint& hub, std::string role, ClientOptions options) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const auto port = std::to_string(hub.port);
  if (int rc = ::getaddrinfo(hub.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    throw ClientError(ClientErrc::ConnectFailed, "cannot resolve " + hub.to_string() + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  int last_errno = 0;
  for (auto* ai = found; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last_errno = errno;
      continue;
    }
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) {
    throw ClientError(ClientErrc::ConnectFailed, "cannot connect to " + hub.to_string() + ": " + std::strerror(last_errno));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  std::unique_ptr<HubClient> client(new HubClient(fd, role, options));
  client->send(protocol::make_frame(MessageKind::Register, {0, role, ""}));

  const auto deadline = std::chrono::steady_clock::now() + options.register_timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ClientError(ClientErrc::Timeout, "no registration acknowledgement from hub");
    std::optional<Frame> frame;
    try {
      frame = client->receive(left);
    } catch (const ClientError&) {
      throw ClientError(ClientErrc::RegistrationRejected, "hub closed the connection during registration");
    }
    if (!frame || frame->kind != MessageKind::StateBroadcast) continue;
    const auto env = protocol::envelope_of(*frame);
    if (env.body == "registered") return client;
    if (env.body.starts_with("error:")) {
      throw ClientError(ClientErrc::RegistrationRejected, "hub rejected registration as " + role + ": " + env.body);
    }
  }
}

HubClient::HubClient(int fd, std::string role, ClientOptions options)
    : fd_(fd), role_(std::move(role)), options_(options) {
  reader_ = std::thread([this] { reader_loop(); });
  heartbeat_ = std::thread([this] { heartbeat_loop(); });
}

HubClient::~HubClient() { close(); }

void HubClient::close() {
  if (closing_.exchange(true)) return;
  {
    std::lock_guard lk(hb_mu_);
  }
  hb_cv_.notify_all();
  ::shutdown(fd_, SHUT_RDWR);
  if (reader_.joinable()) reader_.join();
  if (heartbeat_.joinable()) heartbeat_.join();
  ::close(fd_);
  connected_ = false;
  queue_cv_.notify_all();
}

void HubClient::send_raw(std::string_view bytes) {
  std::lock_guard lk(write_mu_);
  if (!connected_) throw ClientError(ClientErrc::Disconnected, "hub connection is closed");
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      connected_ = false;
      queue_cv_.notify_all();
      throw ClientError(ClientErrc::Disconnected, std::string("send failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void HubClient::send(const Frame& frame) { send_raw(protocol::encode_frame(frame)); }

std::optional<Frame> HubClient::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lk(queue_mu_);
  queue_cv_.wait_for(lk, timeout, [this] { return !inbound_.empty() || !connected_; });
  if (!inbound_.empty()) {
    auto f = std::move(inbound_.front());
    inbound_.pop_front();
    return f;
  }
  if (!connected_) throw ClientError(ClientErrc::Disconnected, "hub connection lost");
  return std::nullopt;
}

void HubClient::reader_loop() {
  std::string buffer;
  char chunk[8192];
  for (;;) {
    const auto n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (auto nl = buffer.find('\n', start); nl != std::string::npos; nl = buffer.find('\n', start)) {
      const std::string_view line(buffer.data() + start, nl - start);
      start = nl + 1;
      Frame frame;
      try {
        frame = protocol::decode_frame(line);
      } catch (const protocol::ProtocolError&) {
        continue;
      }
      if (frame.kind == MessageKind::Heartbeat && !options_.deliver_heartbeats) continue;
      {
        std::lock_guard lk(queue_mu_);
        inbound_.push_back(std::move(frame));
      }
      queue_cv_.notify_all();
    }
    buffer.erase(0, start);
  }
  {
    std::lock_guard lk(queue_mu_);
    connected_ = false;
  }
  queue_cv_.notify_all();
}

void HubClient::heartbeat_loop() {
  std::unique_lock lk(hb_mu_);
  while (!closing_) {
    if (hb_cv_.wait_for(lk, options_.heartbeat_interval, [this] { return closing_.load(); })) break;
    try {
      send(Frame{MessageKind::Heartbeat, ""});
    } catch (const ClientError&) {
      break;
    }
  }
}

}  // namespace pgpt::hub
