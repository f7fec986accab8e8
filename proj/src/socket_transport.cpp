#include "telehaptic/socket_transport.hpp"

#include "telehaptic/errors.hpp"

#include <boost/asio.hpp>

#include <cstdlib>
#include <string>

namespace telehaptic {

namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

class SocketStream final : public ByteStream {
 public:
  SocketStream(std::shared_ptr<net::io_context> io, tcp::socket socket)
      : io_(std::move(io)), socket_(std::move(socket)) {
    boost::system::error_code ec;
    socket_.set_option(tcp::no_delay(true), ec);
  }

  ~SocketStream() override { close(); }

  void write(std::span<const std::uint8_t> bytes) override {
    if (!open_) return;
    boost::system::error_code ec;
    net::write(socket_, net::buffer(bytes.data(), bytes.size()), ec);
    if (ec) close();
  }

  std::vector<std::uint8_t> read_available() override {
    std::vector<std::uint8_t> out;
    if (!open_) return out;
    boost::system::error_code ec;
    // A non-blocking read distinguishes "nothing yet" from an orderly shutdown.
    socket_.non_blocking(true, ec);
    std::uint8_t chunk[4096];
    while (true) {
      const std::size_t n = socket_.read_some(net::buffer(chunk), ec);
      if (ec == net::error::would_block || ec == net::error::try_again) break;
      if (ec) {
        close();
        break;
      }
      out.insert(out.end(), chunk, chunk + n);
    }
    socket_.non_blocking(false, ec);
    return out;
  }

  bool is_open() const override { return open_; }

  void close() override {
    if (!open_) return;
    open_ = false;
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

 private:
  std::shared_ptr<net::io_context> io_;
  tcp::socket socket_;
  bool open_ = true;
};

}  // namespace

struct TcpListener::Impl {
  std::shared_ptr<net::io_context> io = std::make_shared<net::io_context>();
  tcp::acceptor acceptor{*io};
};

TcpListener::TcpListener(std::uint16_t port, const std::string& address) : impl_(std::make_unique<Impl>()) {
  boost::system::error_code ec;
  const tcp::endpoint ep(net::ip::make_address(address, ec), port);
  if (ec) throw Error("invalid listen address '" + address + "'");
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error("cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
}

TcpListener::~TcpListener() = default;

std::uint16_t TcpListener::port() const { return impl_->acceptor.local_endpoint().port(); }

std::unique_ptr<ByteStream> TcpListener::accept() {
  tcp::socket socket(*impl_->io);
  boost::system::error_code ec;
  impl_->acceptor.accept(socket, ec);
  if (ec) throw Error("accept failed: " + ec.message());
  return std::make_unique<SocketStream>(impl_->io, std::move(socket));
}

std::unique_ptr<ByteStream> tcp_connect(const std::string& host, std::uint16_t port) {
  auto io = std::make_shared<net::io_context>();
  tcp::resolver resolver(*io);
  boost::system::error_code ec;
  const auto endpoints = resolver.resolve(host, std::to_string(port), ec);
  if (ec) throw Error("cannot resolve " + host + ": " + ec.message());
  tcp::socket socket(*io);
  net::connect(socket, endpoints, ec);
  if (ec) throw Error("cannot connect to " + host + ":" + std::to_string(port) + ": " + ec.message());
  return std::make_unique<SocketStream>(io, std::move(socket));
}

std::uint16_t default_slave_port() {
  if (const char* env = std::getenv("TELEHAPTIC_PORT")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v < 65536) return static_cast<std::uint16_t>(v);
  }
  return 7420;
}

}  // namespace telehaptic
