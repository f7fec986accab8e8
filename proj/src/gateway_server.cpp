#include "telehaptic/errors.hpp"
#include "telehaptic/gateway.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace telehaptic {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {
// A console that stops reading loses its oldest frames beyond this backlog.
constexpr std::size_t kMaxBacklog = 64;
}  // namespace

class GatewaySession;

struct GatewayServer::Impl {
  net::io_context io;
  tcp::acceptor acceptor{io};
  std::thread thread;

  mutable std::mutex mutex;
  std::map<std::uint64_t, std::weak_ptr<GatewaySession>> sessions;
  std::vector<Inbound> inbound;
  std::uint64_t next_id = 1;

  void accept();
};

class GatewaySession : public std::enable_shared_from_this<GatewaySession> {
 public:
  // The server outlives every handler: its destructor stops and joins the I/O thread.
  GatewaySession(tcp::socket socket, GatewayServer::Impl* server, std::uint64_t id)
      : ws_(std::move(socket)), server_(server), id_(id) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      {
        std::lock_guard lock(self->server_->mutex);
        self->server_->sessions[self->id_] = self;
      }
      self->read();
    });
  }

  void deliver(std::shared_ptr<const std::string> text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)] {
      self->queue_.push_back(text);
      if (self->queue_.size() > kMaxBacklog) self->queue_.erase(self->queue_.begin() + 1);
      if (self->queue_.size() == 1) self->write();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->leave();
        return;
      }
      {
        std::lock_guard lock(self->server_->mutex);
        self->server_->inbound.push_back({self->id_, beast::buffers_to_string(self->buffer_.data())});
      }
      self->buffer_.consume(self->buffer_.size());
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->leave();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  void leave() {
    std::lock_guard lock(server_->mutex);
    server_->sessions.erase(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  GatewayServer::Impl* server_;
  std::uint64_t id_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
};

void GatewayServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::uint64_t id;
    {
      std::lock_guard lock(mutex);
      id = next_id++;
    }
    std::make_shared<GatewaySession>(std::move(socket), this, id)->start();
    accept();
  });
}

GatewayServer::GatewayServer(std::uint16_t port, const std::string& address)
    : impl_(std::make_unique<Impl>()) {
  beast::error_code ec;
  const tcp::endpoint ep(net::ip::make_address(address, ec), port);
  if (ec) throw Error("invalid gateway address '" + address + "'");
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error("gateway cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
  impl_->accept();
  impl_->thread = std::thread([impl = impl_.get()] { impl->io.run(); });
}

GatewayServer::~GatewayServer() {
  impl_->io.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint16_t GatewayServer::port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t GatewayServer::clients() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->sessions.size();
}

std::vector<GatewayServer::Inbound> GatewayServer::drain_inbound() {
  std::lock_guard lock(impl_->mutex);
  std::vector<Inbound> out;
  out.swap(impl_->inbound);
  return out;
}

void GatewayServer::send(std::uint64_t client, std::string text) {
  std::shared_ptr<GatewaySession> target;
  {
    std::lock_guard lock(impl_->mutex);
    if (const auto it = impl_->sessions.find(client); it != impl_->sessions.end()) target = it->second.lock();
  }
  if (target) target->deliver(std::make_shared<const std::string>(std::move(text)));
}

void GatewayServer::broadcast(std::string text) {
  const auto shared = std::make_shared<const std::string>(std::move(text));
  std::vector<std::shared_ptr<GatewaySession>> targets;
  {
    std::lock_guard lock(impl_->mutex);
    for (const auto& [id, weak] : impl_->sessions) {
      if (auto s = weak.lock()) targets.push_back(std::move(s));
    }
  }
  for (const auto& s : targets) s->deliver(shared);
}

}  // namespace telehaptic
