#pragma once

#include "telehaptic/transport.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace telehaptic {

/// Listens on a TCP port and hands out connected byte streams.
class TcpListener {
 public:
  /// Port 0 picks a free port; see port().
  explicit TcpListener(std::uint16_t port, const std::string& address = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const;
  /// Blocks until a peer connects.
  std::unique_ptr<ByteStream> accept();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Connects to a listening endpoint. Throws telehaptic::Error on failure.
std::unique_ptr<ByteStream> tcp_connect(const std::string& host, std::uint16_t port);

/// Slave listen port: TELEHAPTIC_PORT if set and valid, otherwise 7420.
std::uint16_t default_slave_port();

}  // namespace telehaptic
