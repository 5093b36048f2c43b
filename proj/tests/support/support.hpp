#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pgpt/hub.hpp"
#include "pgpt/robot_runner.hpp"

namespace testing {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::filesystem::path test_data(const std::string& name);
std::filesystem::path repo_path(const std::string& name);

// Polls `pred` until it holds or `timeout` passes.
bool wait_until(const std::function<bool()>& pred, std::chrono::milliseconds timeout = std::chrono::seconds(5));

// Hub on ephemeral loopback ports with a dispatcher thread.
class HubFixture {
 public:
  explicit HubFixture(pgpt::hub::HubConfig config = {});
  ~HubFixture();

  pgpt::hub::Hub& hub() { return hub_; }
  pgpt::hub::Endpoint tcp() const { return {"127.0.0.1", hub_tcp_}; }
  pgpt::hub::Endpoint ws() const { return {"127.0.0.1", hub_ws_}; }

  std::vector<pgpt::hub::RouteRecord> routes() const;

 private:
  pgpt::hub::Hub hub_;
  std::uint16_t hub_tcp_ = 0;
  std::uint16_t hub_ws_ = 0;
  mutable std::mutex mu_;
  std::vector<pgpt::hub::RouteRecord> routes_;
};

// RobotRunner serving on its own thread.
class RobotFixture {
 public:
  RobotFixture(pgpt::hub::Endpoint hub, pgpt::robot::RobotRunnerConfig config);
  ~RobotFixture();

  void stop();
  pgpt::robot::RobotRunner& runner() { return *runner_; }

 private:
  std::atomic<bool> stop_{false};
  std::unique_ptr<pgpt::robot::RobotRunner> runner_;
  std::thread thread_;
};

// Minimal synchronous WebSocket client for the /observe endpoint.
class WsClient {
 public:
  WsClient(const pgpt::hub::Endpoint& ep, const std::string& target = "/observe");
  ~WsClient();

  void send(const std::string& text);
  // Empty optional on timeout or close.
  std::optional<std::string> receive(std::chrono::milliseconds timeout);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Sends a raw HTTP GET to the WebSocket port and returns the status code.
int http_get_status(const pgpt::hub::Endpoint& ep, const std::string& target);

}  // namespace testing

namespace testing {

// Compares a benchmark CSV against a golden file. Every field must match
// exactly except mean_recognition_time_ms, which may differ by `time_tol_ms`.
// On mismatch returns false and describes the first difference in `why`.
bool bench_csv_matches(const std::string& actual, const std::string& golden, double time_tol_ms, std::string* why);

}  // namespace testing
