#include "pgpt/robot_runner.hpp"

#include <thread>

#include <spdlog/spdlog.h>

namespace pgpt::robot {

RobotRunner::Connector controller_connector(hub::Endpoint endpoint, hub::ClientOptions options) {
  return [endpoint = std::move(endpoint), options]() -> std::unique_ptr<hub::HubLink> {
    return hub::HubClient::connect(endpoint, std::string(kSenderName), options);
  };
}

RobotRunner::RobotRunner(RobotRunnerConfig config, Connector connect)
    : config_(std::move(config)), connect_(std::move(connect)) {
  if (config_.virtual_clock) {
    auto vc = std::make_unique<VirtualClock>();
    virtual_clock_ = vc.get();
    clock_ = std::move(vc);
  } else {
    clock_ = std::make_unique<SteadyClock>();
  }
  if (!config_.event_log.empty()) {
    log_file_.open(config_.event_log, std::ios::out | std::ios::trunc);
    if (!log_file_) throw Error("cannot open event log " + config_.event_log.string());
  }
  sim_ = std::make_unique<RobotSim>(
      config_.registry, config_.gestures, *clock_, [this](const protocol::Frame& f) { send(f); },
      [this](const RobotEvent& e) {
        if (log_file_.is_open()) {
          log_file_ << e.to_line() << '\n';
          log_file_.flush();
        }
      });
}

void RobotRunner::send(const protocol::Frame& frame) {
  if (!link_) return;
  try {
    link_->send(frame);
  } catch (const hub::ClientError& e) {
    spdlog::warn("robot: send failed: {}", e.what());
  }
}

void RobotRunner::run(const std::atomic<bool>& stop) {
  constexpr std::chrono::milliseconds kIdleWait{50};
  while (!stop) {
    if (!link_ || !link_->connected()) {
      link_.reset();
      try {
        link_ = connect_();
        spdlog::info("robot: registered as controller");
      } catch (const Error& e) {
        spdlog::warn("robot: {}; retrying", e.what());
        std::this_thread::sleep_for(config_.reconnect_delay);
        continue;
      }
    }

    std::chrono::milliseconds wait = kIdleWait;
    std::optional<std::int64_t> deadline;
    {
      std::lock_guard lk(mu_);
      deadline = sim_->next_deadline();
      if (deadline) {
        if (virtual_clock_) {
          wait = sim_->busy() ? std::chrono::milliseconds(0) : kIdleWait;
        } else {
          wait = std::clamp(std::chrono::milliseconds(*deadline - clock_->now_ms()), std::chrono::milliseconds(0),
                            kIdleWait);
        }
      }
    }

    std::optional<protocol::Frame> frame;
    try {
      frame = link_->receive(wait);
    } catch (const hub::ClientError&) {
      spdlog::warn("robot: hub connection lost");
      link_.reset();
      continue;
    }

    std::lock_guard lk(mu_);
    if (frame) {
      sim_->handle_frame(*frame);
    } else if (virtual_clock_ && deadline && sim_->busy()) {
      virtual_clock_->set(*deadline);
    }
    sim_->poll();
  }
  link_.reset();
}

std::uint64_t RobotRunner::end_flags_sent() const {
  std::lock_guard lk(mu_);
  return sim_->end_flags_sent();
}

std::string RobotRunner::event_log() const {
  std::lock_guard lk(mu_);
  return sim_->event_log();
}

}  // namespace pgpt::robot
