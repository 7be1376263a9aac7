#include <chrono>
#include <deque>
#include <iostream>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "plato/cli/teleop.hpp"
#include "plato/common/error.hpp"

namespace plato::cli {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

constexpr const char* kInfoPage =
    "plato teleop server\n"
    "Connect a websocket to this address.\n"
    "server -> client at render rate: {\"t\", \"ego\": [x,y,vx,vy], \"tether\", \"blocks\": [[x,y,theta,w,h]], "
    "\"contact\", \"recording\"}\n"
    "client -> server: {\"keys\": {\"left\",\"right\",\"up\",\"down\"}, \"grab\"} or "
    "{\"cmd\": \"record_start\"|\"record_stop\"|\"reset\"|\"save\", \"path\"}\n";

class WsClient;

}  // namespace

struct TeleopServer::Impl {
  TeleopServer& owner;
  TeleopServerOptions opt;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  net::steady_timer timer{ioc};
  net::signal_set signals{ioc};
  std::vector<std::weak_ptr<WsClient>> clients;
  double control_budget = 0.0;
  std::chrono::steady_clock::time_point next_tick;

  Impl(TeleopServer& o, TeleopServerOptions options) : owner(o), opt(std::move(options)) {}

  void accept();
  void tick();
  void broadcast(const std::string& text);
  std::optional<std::string> on_message(const std::string& text) {
    std::lock_guard<std::mutex> lock(owner.mutex_);
    auto reply = owner.session_.handle(text);
    if (!reply) return std::nullopt;
    return reply->dump();
  }
};

namespace {

class WsClient : public std::enable_shared_from_this<WsClient> {
 public:
  WsClient(tcp::socket socket, TeleopServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->open_ = true;
      self->read();
    });
  }

  void send(std::string text) {
    if (!open_) return;
    // Drop stale frames when a slow client falls behind; command replies are small.
    if (queue_.size() > 8) queue_.erase(queue_.begin() + 1, queue_.end());
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write();
  }

  bool open() const { return open_; }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->open_ = false;
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      if (auto reply = self->server_.on_message(text)) self->send(std::move(*reply));
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->open_ = false;
        self->queue_.clear();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  TeleopServer::Impl& server_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool open_ = false;
};

/// Reads the first HTTP request: upgrades go to a WsClient, anything else gets the info page.
class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, TeleopServer::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void start() {
    stream_.expires_after(std::chrono::seconds(10));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->dispatch();
    });
  }

 private:
  void dispatch() {
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      auto client = std::make_shared<WsClient>(stream_.release_socket(), server_);
      server_.clients.push_back(client);
      client->start(std::move(req_));
      return;
    }
    res_.version(req_.version());
    res_.result(http::status::ok);
    res_.set(http::field::content_type, "text/plain");
    res_.body() = kInfoPage;
    res_.keep_alive(false);
    res_.prepare_payload();
    http::async_write(stream_, res_, [self = shared_from_this()](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  TeleopServer::Impl& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  http::response<http::string_body> res_;
};

}  // namespace

void TeleopServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpConnection>(std::move(socket), *this)->start();
    accept();
  });
}

void TeleopServer::Impl::tick() {
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(1.0 / opt.render_hz));
  next_tick += period;
  timer.expires_at(next_tick);
  timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    std::string frame;
    {
      std::lock_guard<std::mutex> lock(owner.mutex_);
      // The world runs at its control rate whatever the render rate is.
      control_budget += owner.session_.world().config().control_rate / opt.render_hz;
      while (control_budget >= 1.0) {
        owner.session_.step();
        control_budget -= 1.0;
      }
      frame = owner.session_.frame().dump();
    }
    broadcast(frame);
    tick();
  });
}

void TeleopServer::Impl::broadcast(const std::string& text) {
  std::erase_if(clients, [](const std::weak_ptr<WsClient>& w) {
    auto c = w.lock();
    return !c || !c->open();
  });
  for (auto& w : clients) {
    if (auto c = w.lock()) c->send(text);
  }
}

TeleopServer::TeleopServer(const sim::WorldConfig& config, std::uint64_t seed, TeleopServerOptions opt)
    : session_(config, seed), impl_(std::make_unique<Impl>(*this, opt)) {
  if (!(opt.render_hz > 0)) throw ConfigError("render rate must be positive");
  beast::error_code ec;
  const tcp::endpoint ep(net::ip::make_address(opt.address, ec), opt.port);
  if (ec) throw ConfigError("bad listen address '" + opt.address + "'");
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw ConfigError("cannot listen on " + opt.address + ":" + std::to_string(opt.port) + ": " + ec.message());
}

TeleopServer::~TeleopServer() = default;

unsigned short TeleopServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void TeleopServer::run() {
  if (impl_->opt.handle_signals) {
    impl_->signals.add(SIGINT);
    impl_->signals.add(SIGTERM);
    impl_->signals.async_wait([this](beast::error_code ec, int) {
      if (!ec) stop();
    });
  }
  impl_->accept();
  impl_->next_tick = std::chrono::steady_clock::now();
  impl_->tick();
  impl_->ioc.run();
}

void TeleopServer::stop() { impl_->ioc.stop(); }

}  // namespace plato::cli
