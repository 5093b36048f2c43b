#pragma once

// Network driver for RobotSim: registers as the controller, feeds inbound
// frames to the simulator and forwards its E and X frames back to the hub.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>

#include "pgpt/hub_client.hpp"
#include "pgpt/robot_sim.hpp"

namespace pgpt::robot {

struct RobotRunnerConfig {
  ActionRegistry registry = ActionRegistry::seed();
  std::vector<GestureRule> gestures = default_gesture_rules();
  // With a virtual clock, simulated time jumps straight to the next deadline
  // whenever the robot is busy, so a 6 s dance completes immediately.
  bool virtual_clock = false;
  std::filesystem::path event_log;
  std::chrono::milliseconds reconnect_delay{500};
};

class RobotRunner {
 public:
  using Connector = std::function<std::unique_ptr<hub::HubLink>()>;

  RobotRunner(RobotRunnerConfig config, Connector connect);

  // Serves frames until `stop` becomes true. Reconnects after a lost link.
  void run(const std::atomic<bool>& stop);

  std::uint64_t end_flags_sent() const;
  std::string event_log() const;

 private:
  void send(const protocol::Frame& frame);

  RobotRunnerConfig config_;
  Connector connect_;
  std::unique_ptr<Clock> clock_;
  VirtualClock* virtual_clock_ = nullptr;
  std::ofstream log_file_;
  std::unique_ptr<hub::HubLink> link_;
  mutable std::mutex mu_;
  std::unique_ptr<RobotSim> sim_;
};

// Default connector: a HubClient registered as "controller".
RobotRunner::Connector controller_connector(hub::Endpoint endpoint, hub::ClientOptions options = {});

}  // namespace pgpt::robot
