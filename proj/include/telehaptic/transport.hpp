#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace telehaptic {

/// Ordered, reliable byte stream between two endpoints.
class ByteStream {
 public:
  virtual ~ByteStream() = default;

  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  /// Everything received so far; never blocks.
  virtual std::vector<std::uint8_t> read_available() = 0;
  virtual bool is_open() const = 0;
  virtual void close() = 0;
};

/// Two connected in-process ends. Closing either end closes both.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback_pair();

}  // namespace telehaptic
