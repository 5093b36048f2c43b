#include "support.hpp"

#include <stdlib.h>

#include <condition_variable>
#include <deque>
#include <fstream>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace testing {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "pgpt-test-XXXXXX").string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::filesystem::path test_data(const std::string& name) { return std::filesystem::path(PGPT_TEST_DATA) / name; }
std::filesystem::path repo_path(const std::string& name) { return std::filesystem::path(PGPT_REPO_ROOT) / name; }

bool wait_until(const std::function<bool()>& pred, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return pred();
}

HubFixture::HubFixture(pgpt::hub::HubConfig config) : hub_(std::move(config)) {
  hub_.bind({"127.0.0.1", 0}, {"127.0.0.1", 0});
  hub_tcp_ = hub_.tcp_port();
  hub_ws_ = hub_.ws_port();
  hub_.set_route_observer([this](const pgpt::hub::RouteRecord& r) {
    std::lock_guard lk(mu_);
    routes_.push_back(r);
  });
  hub_.start();
}

HubFixture::~HubFixture() { hub_.stop(); }

std::vector<pgpt::hub::RouteRecord> HubFixture::routes() const {
  std::lock_guard lk(mu_);
  return routes_;
}

RobotFixture::RobotFixture(pgpt::hub::Endpoint hub, pgpt::robot::RobotRunnerConfig config) {
  runner_ = std::make_unique<pgpt::robot::RobotRunner>(std::move(config), pgpt::robot::controller_connector(hub));
  thread_ = std::thread([this] { runner_->run(stop_); });
}

RobotFixture::~RobotFixture() { stop(); }

void RobotFixture::stop() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
}

struct WsClient::Impl {
  asio::io_context io;
  websocket::stream<tcp::socket> ws{io};
  beast::flat_buffer buffer;
  std::thread thread;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> inbox;
  std::deque<std::string> outbox;
  bool closed = false;

  void read_next() {
    ws.async_read(buffer, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        std::lock_guard lk(mu);
        closed = true;
        cv.notify_all();
        return;
      }
      {
        std::lock_guard lk(mu);
        inbox.push_back(beast::buffers_to_string(buffer.data()));
      }
      buffer.consume(buffer.size());
      cv.notify_all();
      read_next();
    });
  }

  void write_next() {
    ws.async_write(asio::buffer(outbox.front()), [this](beast::error_code ec, std::size_t) {
      outbox.pop_front();
      if (!ec && !outbox.empty()) write_next();
    });
  }
};

WsClient::WsClient(const pgpt::hub::Endpoint& ep, const std::string& target) : impl_(std::make_unique<Impl>()) {
  tcp::resolver resolver(impl_->io);
  asio::connect(impl_->ws.next_layer(), resolver.resolve(ep.host, std::to_string(ep.port)));
  impl_->ws.handshake(ep.host, target);
  impl_->ws.text(true);
  impl_->read_next();
  impl_->thread = std::thread([this] { impl_->io.run(); });
}

WsClient::~WsClient() { close(); }

void WsClient::send(const std::string& text) {
  asio::post(impl_->io, [impl = impl_.get(), text] {
    impl->outbox.push_back(text);
    if (impl->outbox.size() == 1) impl->write_next();
  });
}

std::optional<std::string> WsClient::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lk(impl_->mu);
  impl_->cv.wait_for(lk, timeout, [this] { return !impl_->inbox.empty() || impl_->closed; });
  if (impl_->inbox.empty()) return std::nullopt;
  auto msg = std::move(impl_->inbox.front());
  impl_->inbox.pop_front();
  return msg;
}

void WsClient::close() {
  if (!impl_->thread.joinable()) return;
  asio::post(impl_->io, [impl = impl_.get()] {
    beast::error_code ec;
    impl->ws.next_layer().shutdown(tcp::socket::shutdown_both, ec);
    impl->ws.next_layer().close(ec);
  });
  impl_->thread.join();
}

int http_get_status(const pgpt::hub::Endpoint& ep, const std::string& target) {
  asio::io_context io;
  tcp::socket sock(io);
  tcp::resolver resolver(io);
  asio::connect(sock, resolver.resolve(ep.host, std::to_string(ep.port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, ep.host);
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  return static_cast<int>(res.result_int());
}

}  // namespace testing

namespace testing {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

bool bench_csv_matches(const std::string& actual, const std::string& golden, double time_tol_ms, std::string* why) {
  const auto a = split(actual, '\n');
  const auto g = split(golden, '\n');
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (a.size() != g.size()) {
    return fail("line count " + std::to_string(a.size()) + " != " + std::to_string(g.size()));
  }
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (k < 2 || a[k].empty() || g[k].empty()) {
      if (a[k] != g[k]) return fail("line " + std::to_string(k + 1) + ": '" + a[k] + "' != '" + g[k] + "'");
      continue;
    }
    const auto fa = split(a[k], ',');
    const auto fg = split(g[k], ',');
    if (fa.size() != 5 || fg.size() != 5) return fail("line " + std::to_string(k + 1) + ": expected 5 fields");
    for (std::size_t f = 0; f < 4; ++f) {
      if (fa[f] != fg[f]) return fail("line " + std::to_string(k + 1) + " field " + std::to_string(f + 1) + ": '" +
                                      fa[f] + "' != '" + fg[f] + "'");
    }
    if (fa[4] == "NA" || fg[4] == "NA") {
      if (fa[4] != fg[4]) return fail("line " + std::to_string(k + 1) + ": NA mismatch");
      continue;
    }
    const double dt = std::stod(fa[4]) - std::stod(fg[4]);
    if (dt > time_tol_ms || dt < -time_tol_ms) {
      return fail("line " + std::to_string(k + 1) + ": time " + fa[4] + " vs " + fg[4]);
    }
  }
  return true;
}

}  // namespace testing
