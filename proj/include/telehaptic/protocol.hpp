#pragma once

#include "telehaptic/control.hpp"
#include "telehaptic/haptic.hpp"
#include "telehaptic/tactile.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace telehaptic::wire {

// Frame layout, little-endian throughout:
//   magic 'T' 'H' | version u8 | type u8 | seq u32 | sim_timestamp_us u64 |
//   payload_len u16 | payload | crc32 u32 over every preceding byte
inline constexpr std::uint8_t kMagic0 = 0x54;
inline constexpr std::uint8_t kMagic1 = 0x48;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 18;
inline constexpr std::size_t kTrailerSize = 4;

enum class MsgType : std::uint8_t {
  TcpCommand = 0x01,
  GripperCommand = 0x02,
  RobotState = 0x03,
  TactileFrame = 0x04,
  ForceFeedback = 0x05,
  SceneEvent = 0x06,
  ConfigSet = 0x07,
};

std::string_view to_string(MsgType type);

// Pose: x, y, z in micrometres then rx, ry, rz in millidegrees.
using QuantizedPose = std::array<std::int32_t, 6>;

inline constexpr std::uint16_t kContactUnset = 0xFFFF;

struct TcpCommand {
  QuantizedPose pose{};
  bool operator==(const TcpCommand&) const = default;
};

struct GripperCommand {
  std::uint16_t opening_permille = 0;
  bool operator==(const GripperCommand&) const = default;
};

struct RobotState {
  QuantizedPose pose{};
  std::uint16_t opening_permille = 0;
  std::uint16_t contact_permille = kContactUnset;
  bool operator==(const RobotState&) const = default;
};

struct TactileFrameMsg {
  Finger finger = Finger::Left;
  std::array<std::uint16_t, kSensorRows * kSensorCols> centinewtons{};  // row-major
  bool operator==(const TactileFrameMsg&) const = default;
};

struct ForceFeedback {
  std::uint32_t millinewtons = 0;
  bool operator==(const ForceFeedback&) const = default;
};

struct SceneEventMsg {
  std::uint8_t event_code = 0;
  std::int64_t microliters = 0;
  std::uint8_t location = 0;
  bool operator==(const SceneEventMsg&) const = default;
};

enum class ConfigKey : std::uint8_t { Scale = 1, Lock = 2 };

struct ConfigSet {
  std::uint8_t key = 0;
  std::uint8_t value = 0;
  bool operator==(const ConfigSet&) const = default;
};

// Alternative order follows MsgType numbering.
using Payload = std::variant<TcpCommand, GripperCommand, RobotState, TactileFrameMsg, ForceFeedback,
                             SceneEventMsg, ConfigSet>;

struct WireMessage {
  std::uint32_t seq = 0;
  std::uint64_t sim_timestamp_us = 0;
  Payload payload;

  MsgType type() const { return static_cast<MsgType>(payload.index() + 1); }
  bool operator==(const WireMessage&) const = default;
};

/// Fixed payload length for a message type, or nullopt for unknown codes.
std::optional<std::size_t> payload_size(std::uint8_t type_code);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode(const WireMessage& msg);

enum class DecodeStatus { Ok, NeedMoreBytes, BadVersion, Corrupt, UnknownType };

std::string_view to_string(DecodeStatus status);

struct DecodeResult {
  DecodeStatus status = DecodeStatus::NeedMoreBytes;
  std::optional<WireMessage> message;
  // Bytes spanned by the inspected frame (0 unless a full frame was present).
  std::size_t consumed = 0;
};

/// Decodes the frame at the start of `bytes`.
DecodeResult decode(std::span<const std::uint8_t> bytes);

/// Streaming reassembly. After a bad frame the decoder reports one error and
/// then hunts byte by byte for the next valid frame without further reports.
class StreamDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);

  /// Next decoded message or error; nullopt when more bytes are needed.
  std::optional<DecodeResult> next();

  std::size_t buffered() const { return buffer_.size() - head_; }
  std::uint64_t frames() const { return frames_; }
  std::uint64_t errors() const { return errors_; }

 private:
  void drop(std::size_t n);

  std::vector<std::uint8_t> buffer_;
  std::size_t head_ = 0;
  bool hunting_ = false;
  std::uint64_t frames_ = 0;
  std::uint64_t errors_ = 0;
};

/// Tracks per-direction sequence numbers and counts gaps.
class SequenceTracker {
 public:
  void observe(std::uint32_t seq);
  std::uint64_t gaps() const { return gaps_; }
  std::uint64_t missing() const { return missing_; }
  std::uint64_t reordered() const { return reordered_; }

 private:
  std::optional<std::uint32_t> last_;
  std::uint64_t gaps_ = 0;
  std::uint64_t missing_ = 0;
  std::uint64_t reordered_ = 0;
};

// Quantisation between domain values and wire units.
std::int32_t to_micrometres(double mm);
std::int32_t to_millidegrees(double deg);
std::uint16_t to_permille(double normalized);
double from_permille(std::uint16_t permille);

QuantizedPose quantize_pose(const RobotTarget& target);
RobotTarget dequantize_pose(const QuantizedPose& pose, std::uint64_t timestamp_us);

TactileFrameMsg to_message(const TactileFrame& frame);
TactileFrame from_message(const TactileFrameMsg& msg, std::uint64_t timestamp_us);

ForceFeedback to_message(const KinestheticForce& force);

}  // namespace telehaptic::wire
