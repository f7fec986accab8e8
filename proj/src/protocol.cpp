#include "telehaptic/protocol.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace telehaptic::wire {

namespace {

constexpr std::array<std::size_t, 7> kPayloadSizes = {
    24,   // TcpCommand
    2,    // GripperCommand
    28,   // RobotState
    101,  // TactileFrame
    4,    // ForceFeedback
    10,   // SceneEvent
    2,    // ConfigSet
};
constexpr std::size_t kMaxPayload = 101;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    const U bits = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    using U = std::make_unsigned_t<T>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return static_cast<T>(bits);
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void put_pose(Writer& w, const QuantizedPose& pose) {
  for (std::int32_t v : pose) w.put(v);
}

QuantizedPose get_pose(Reader& r) {
  QuantizedPose pose{};
  for (auto& v : pose) v = r.get<std::int32_t>();
  return pose;
}

struct PayloadWriter {
  Writer& w;
  void operator()(const TcpCommand& m) const { put_pose(w, m.pose); }
  void operator()(const GripperCommand& m) const { w.put(m.opening_permille); }
  void operator()(const RobotState& m) const {
    put_pose(w, m.pose);
    w.put(m.opening_permille);
    w.put(m.contact_permille);
  }
  void operator()(const TactileFrameMsg& m) const {
    w.put(static_cast<std::uint8_t>(m.finger));
    for (std::uint16_t v : m.centinewtons) w.put(v);
  }
  void operator()(const ForceFeedback& m) const { w.put(m.millinewtons); }
  void operator()(const SceneEventMsg& m) const {
    w.put(m.event_code);
    w.put(m.microliters);
    w.put(m.location);
  }
  void operator()(const ConfigSet& m) const {
    w.put(m.key);
    w.put(m.value);
  }
};

Payload read_payload(MsgType type, Reader& r) {
  switch (type) {
    case MsgType::TcpCommand:
      return TcpCommand{get_pose(r)};
    case MsgType::GripperCommand:
      return GripperCommand{r.get<std::uint16_t>()};
    case MsgType::RobotState: {
      RobotState m;
      m.pose = get_pose(r);
      m.opening_permille = r.get<std::uint16_t>();
      m.contact_permille = r.get<std::uint16_t>();
      return m;
    }
    case MsgType::TactileFrame: {
      TactileFrameMsg m;
      m.finger = static_cast<Finger>(r.get<std::uint8_t>());
      for (auto& v : m.centinewtons) v = r.get<std::uint16_t>();
      return m;
    }
    case MsgType::ForceFeedback:
      return ForceFeedback{r.get<std::uint32_t>()};
    case MsgType::SceneEvent: {
      SceneEventMsg m;
      m.event_code = r.get<std::uint8_t>();
      m.microliters = r.get<std::int64_t>();
      m.location = r.get<std::uint8_t>();
      return m;
    }
    case MsgType::ConfigSet: {
      ConfigSet m;
      m.key = r.get<std::uint8_t>();
      m.value = r.get<std::uint8_t>();
      return m;
    }
  }
  return ConfigSet{};
}

template <typename Int>
Int saturate(double v) {
  const double lo = static_cast<double>(std::numeric_limits<Int>::min());
  const double hi = static_cast<double>(std::numeric_limits<Int>::max());
  return static_cast<Int>(std::clamp(std::round(v), lo, hi));
}

}  // namespace

std::string_view to_string(MsgType type) {
  switch (type) {
    case MsgType::TcpCommand: return "tcp_command";
    case MsgType::GripperCommand: return "gripper_command";
    case MsgType::RobotState: return "robot_state";
    case MsgType::TactileFrame: return "tactile_frame";
    case MsgType::ForceFeedback: return "force_feedback";
    case MsgType::SceneEvent: return "scene_event";
    case MsgType::ConfigSet: return "config_set";
  }
  return "unknown";
}

std::string_view to_string(DecodeStatus status) {
  switch (status) {
    case DecodeStatus::Ok: return "ok";
    case DecodeStatus::NeedMoreBytes: return "need_more_bytes";
    case DecodeStatus::BadVersion: return "bad_version";
    case DecodeStatus::Corrupt: return "corrupt";
    case DecodeStatus::UnknownType: return "unknown_type";
  }
  return "unknown";
}

std::optional<std::size_t> payload_size(std::uint8_t type_code) {
  if (type_code < 1 || type_code > kPayloadSizes.size()) return std::nullopt;
  return kPayloadSizes[type_code - 1];
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint8_t> encode(const WireMessage& msg) {
  const auto type_code = static_cast<std::uint8_t>(msg.type());
  const std::size_t len = kPayloadSizes[type_code - 1];
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + len + kTrailerSize);
  Writer w(out);
  w.put(kMagic0);
  w.put(kMagic1);
  w.put(kVersion);
  w.put(type_code);
  w.put(msg.seq);
  w.put(msg.sim_timestamp_us);
  w.put(static_cast<std::uint16_t>(len));
  std::visit(PayloadWriter{w}, msg.payload);
  w.put(crc32(out));
  return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  DecodeResult res;
  if (bytes.size() >= 1 && bytes[0] != kMagic0) return {DecodeStatus::BadVersion, {}, 0};
  if (bytes.size() >= 2 && bytes[1] != kMagic1) return {DecodeStatus::BadVersion, {}, 0};
  if (bytes.size() >= 3 && bytes[2] != kVersion) return {DecodeStatus::BadVersion, {}, 0};
  if (bytes.size() < kHeaderSize) return res;

  Reader header(bytes.subspan(3));
  const auto type_code = header.get<std::uint8_t>();
  const auto seq = header.get<std::uint32_t>();
  const auto timestamp = header.get<std::uint64_t>();
  const auto len = header.get<std::uint16_t>();

  const auto expected = payload_size(type_code);
  if ((expected && len != *expected) || len > kMaxPayload) {
    return {DecodeStatus::Corrupt, {}, 0};
  }
  const std::size_t frame_size = kHeaderSize + len + kTrailerSize;
  if (bytes.size() < frame_size) return res;

  Reader trailer(bytes.subspan(kHeaderSize + len));
  if (trailer.get<std::uint32_t>() != crc32(bytes.first(kHeaderSize + len))) {
    return {DecodeStatus::Corrupt, {}, frame_size};
  }
  if (!expected) return {DecodeStatus::UnknownType, {}, frame_size};

  Reader body(bytes.subspan(kHeaderSize, len));
  WireMessage msg;
  msg.seq = seq;
  msg.sim_timestamp_us = timestamp;
  msg.payload = read_payload(static_cast<MsgType>(type_code), body);
  return {DecodeStatus::Ok, std::move(msg), frame_size};
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (head_ > 0 && head_ == buffer_.size()) {
    buffer_.clear();
    head_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

void StreamDecoder::drop(std::size_t n) {
  head_ += n;
  if (head_ > 4096 && head_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
}

std::optional<DecodeResult> StreamDecoder::next() {
  while (head_ < buffer_.size()) {
    const std::span<const std::uint8_t> view(buffer_.data() + head_, buffer_.size() - head_);
    if (hunting_ && view[0] != kMagic0) {
      const auto it = std::find(view.begin() + 1, view.end(), kMagic0);
      drop(static_cast<std::size_t>(it - view.begin()));
      continue;
    }
    DecodeResult res = decode(view);
    switch (res.status) {
      case DecodeStatus::NeedMoreBytes:
        return std::nullopt;
      case DecodeStatus::Ok:
        hunting_ = false;
        ++frames_;
        drop(res.consumed);
        return res;
      case DecodeStatus::UnknownType:
        // Intact frame of a type this build does not know: skip it whole.
        drop(res.consumed);
        if (hunting_) continue;
        ++errors_;
        return res;
      case DecodeStatus::BadVersion:
      case DecodeStatus::Corrupt:
        drop(1);
        if (hunting_) continue;
        hunting_ = true;
        ++errors_;
        return res;
    }
  }
  return std::nullopt;
}

void SequenceTracker::observe(std::uint32_t seq) {
  if (last_) {
    const std::uint32_t expected = *last_ + 1;
    if (seq != expected) {
      if (static_cast<std::int32_t>(seq - expected) > 0) {
        ++gaps_;
        missing_ += seq - expected;
      } else {
        ++reordered_;
        return;
      }
    }
  }
  last_ = seq;
}

std::int32_t to_micrometres(double mm) { return saturate<std::int32_t>(mm * 1000.0); }
std::int32_t to_millidegrees(double deg) { return saturate<std::int32_t>(deg * 1000.0); }
std::uint16_t to_permille(double normalized) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(normalized, 0.0, 1.0) * 1000.0));
}
double from_permille(std::uint16_t permille) { return permille / 1000.0; }

QuantizedPose quantize_pose(const RobotTarget& t) {
  return {to_micrometres(t.position_mm.x()), to_micrometres(t.position_mm.y()),
          to_micrometres(t.position_mm.z()), to_millidegrees(t.orientation_deg.x()),
          to_millidegrees(t.orientation_deg.y()), to_millidegrees(t.orientation_deg.z())};
}

RobotTarget dequantize_pose(const QuantizedPose& p, std::uint64_t timestamp_us) {
  RobotTarget t;
  t.position_mm = Eigen::Vector3d(p[0], p[1], p[2]) / 1000.0;
  t.orientation_deg = Eigen::Vector3d(p[3], p[4], p[5]) / 1000.0;
  t.timestamp_us = timestamp_us;
  return t;
}

TactileFrameMsg to_message(const TactileFrame& frame) {
  TactileFrameMsg m;
  m.finger = frame.finger;
  for (int r = 0; r < kSensorRows; ++r) {
    for (int c = 0; c < kSensorCols; ++c) {
      m.centinewtons[static_cast<std::size_t>(r * kSensorCols + c)] =
          static_cast<std::uint16_t>(std::lround(frame.cells(r, c) * 100.0));
    }
  }
  return m;
}

TactileFrame from_message(const TactileFrameMsg& msg, std::uint64_t timestamp_us) {
  TactileFrame f;
  f.finger = msg.finger;
  f.timestamp_us = timestamp_us;
  for (int r = 0; r < kSensorRows; ++r) {
    for (int c = 0; c < kSensorCols; ++c) {
      f.cells(r, c) = msg.centinewtons[static_cast<std::size_t>(r * kSensorCols + c)] / 100.0;
    }
  }
  return f;
}

ForceFeedback to_message(const KinestheticForce& force) {
  return ForceFeedback{static_cast<std::uint32_t>(std::lround(force.magnitude_n * 1000.0))};
}

}  // namespace telehaptic::wire
