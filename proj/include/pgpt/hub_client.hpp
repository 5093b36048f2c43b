#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "pgpt/error.hpp"
#include "pgpt/protocol.hpp"

namespace pgpt::hub {

enum class ClientErrc { ConnectFailed, RegistrationRejected, Disconnected, Timeout };

class ClientError : public CodedError<ClientErrc> {
 public:
  using CodedError::CodedError;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
};

// Parses "HOST:PORT". Throws pgpt::Error on malformed input.
Endpoint parse_endpoint(std::string_view text);

// Transport seen by the pipeline and robot: send a frame, wait for the next
// inbound one.
class HubLink {
 public:
  virtual ~HubLink() = default;
  virtual void send(const protocol::Frame& frame) = 0;
  // nullopt on timeout. Throws ClientError(Disconnected) once the link is
  // down and no frames remain.
  virtual std::optional<protocol::Frame> receive(std::chrono::milliseconds timeout) = 0;
  virtual bool connected() const = 0;
};

struct ClientOptions {
  std::chrono::milliseconds heartbeat_interval{5000};
  std::chrono::milliseconds register_timeout{5000};
  // Heartbeat echoes are normally swallowed.
  bool deliver_heartbeats = false;
};

// Stream-socket connection to the hub, registered under one role.
// A reader thread decodes inbound lines into an ordered queue; a heartbeat
// thread sends H frames at the configured interval. send() is thread-safe.
class HubClient final : public HubLink {
 public:
  // Connects, sends R, and waits for the "registered" acknowledgement.
  static std::unique_ptr<HubClient> connect(const Endpoint& hub, std::string role, ClientOptions options = {});

  ~HubClient() override;
  HubClient(const HubClient&) = delete;
  HubClient& operator=(const HubClient&) = delete;

  void send(const protocol::Frame& frame) override;
  // Writes raw bytes, bypassing framing. Test hook for malformed input.
  void send_raw(std::string_view bytes);
  std::optional<protocol::Frame> receive(std::chrono::milliseconds timeout) override;
  bool connected() const override { return connected_.load(); }

  const std::string& role() const noexcept { return role_; }
  void close();

 private:
  HubClient(int fd, std::string role, ClientOptions options);
  void reader_loop();
  void heartbeat_loop();

  int fd_;
  std::string role_;
  ClientOptions options_;
  std::atomic<bool> connected_{true};
  std::atomic<bool> closing_{false};

  std::mutex write_mu_;
  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<protocol::Frame> inbound_;

  std::mutex hb_mu_;
  std::condition_variable hb_cv_;

  std::thread reader_;
  std::thread heartbeat_;
};

}  // namespace pgpt::hub
