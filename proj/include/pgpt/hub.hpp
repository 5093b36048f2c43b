#pragma once

// Central message hub.
//
// Clients connect over a stream socket (or the /observe WebSocket endpoint),
// register a role with an R frame, and from then on every frame they send is
// routed by its prefix:
//
//   S, A, P -> controller      E, T -> pipeline      X -> consoles
//   H       -> echoed to sender
//
// Every routed frame is also copied to all console observers. A frame whose
// destination role has no live client is dropped and the sender receives
// X state=undeliverable. All routing runs on one dispatcher thread.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "pgpt/error.hpp"
#include "pgpt/hub_client.hpp"
#include "pgpt/protocol.hpp"

namespace pgpt::hub {

enum class ClientRole { Pipeline, Controller, Console };

std::string_view to_string(ClientRole role) noexcept;
std::optional<ClientRole> role_from_string(std::string_view name) noexcept;

// Destination role for a routed kind; nullopt for R (registration) and H
// (echo to sender).
std::optional<ClientRole> destination_for(protocol::MessageKind kind) noexcept;

enum class HubErrc { BindFailure, FirstFrameNotRegister, UnknownRole, RoleOccupied };

std::string_view errc_name(HubErrc code) noexcept;

class HubError : public CodedError<HubErrc> {
 public:
  using CodedError::CodedError;
};

struct HubConfig {
  std::chrono::milliseconds heartbeat_interval{5000};
  int missed_heartbeats = 2;
  std::chrono::milliseconds write_timeout{5000};
  std::size_t observer_outbox_limit = 1024;
  // Routing log: one line per routing decision, "<from>\t<to>\t<frame>".
  // Session events are written as lines starting with '#'.
  std::filesystem::path log_path;
};

struct RouteRecord {
  std::string from;  // sender role
  std::string to;    // destination role, "consoles", or "dropped"
  std::string line;  // frame without terminator
};

class Hub {
 public:
  explicit Hub(HubConfig config = {});
  ~Hub();
  Hub(const Hub&) = delete;
  Hub& operator=(const Hub&) = delete;

  // Binds both listeners. Port 0 picks an ephemeral port. Throws
  // HubError(BindFailure).
  void bind(const Endpoint& tcp, const Endpoint& ws);

  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;

  // Runs the dispatcher on the calling thread until stop().
  void run();
  // Runs the dispatcher on a background thread.
  void start();
  // Thread-safe; closes all connections and returns once the dispatcher has
  // exited (when started with start()).
  void stop();

  void set_route_observer(std::function<void(const RouteRecord&)> observer);

  // Whether a client currently holds `role` (any console for Console).
  // Requires a running dispatcher.
  bool has_client(ClientRole role);

  struct Impl;  // opaque

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace pgpt::hub
