#include "doctest.h"
#include "oracles.hpp"

#include "telehaptic/protocol.hpp"

#include <random>

using namespace telehaptic;
using namespace telehaptic::wire;

namespace {

class MessageFactory {
 public:
  explicit MessageFactory(std::uint64_t seed) : rng_(seed) {}

  WireMessage make(int type_index) {
    WireMessage m;
    m.seq = static_cast<std::uint32_t>(rng_());
    m.sim_timestamp_us = rng_();
    switch (type_index) {
      case 0: m.payload = TcpCommand{pose()}; break;
      case 1: m.payload = GripperCommand{u16()}; break;
      case 2: m.payload = RobotState{pose(), u16(), u16()}; break;
      case 3: {
        TactileFrameMsg t;
        t.finger = (rng_() & 1) ? Finger::Right : Finger::Left;
        for (auto& v : t.centinewtons) v = u16();
        m.payload = t;
        break;
      }
      case 4: m.payload = ForceFeedback{static_cast<std::uint32_t>(rng_())}; break;
      case 5:
        m.payload = SceneEventMsg{static_cast<std::uint8_t>(rng_()),
                                  static_cast<std::int64_t>(rng_()),
                                  static_cast<std::uint8_t>(rng_())};
        break;
      default:
        m.payload = ConfigSet{static_cast<std::uint8_t>(rng_()), static_cast<std::uint8_t>(rng_())};
    }
    return m;
  }

 private:
  std::uint16_t u16() { return static_cast<std::uint16_t>(rng_()); }
  QuantizedPose pose() {
    QuantizedPose p;
    for (auto& v : p) v = static_cast<std::int32_t>(rng_());
    return p;
  }
  std::mt19937_64 rng_;
};

std::uint32_t read_le32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (std::uint32_t(b[at + 3]) << 24);
}

std::vector<std::uint8_t> concat(const std::vector<std::vector<std::uint8_t>>& frames) {
  std::vector<std::uint8_t> out;
  for (const auto& f : frames) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace

TEST_CASE("reference CRC check value") {
  const std::string s = "123456789";
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  CHECK(crc32(bytes) == 0xCBF43926u);
  CHECK(oracle::crc32(bytes.data(), bytes.size()) == 0xCBF43926u);
}

TEST_CASE("frame header and gripper payload bytes") {
  WireMessage m{7, 123456, GripperCommand{to_permille(0.5)}};
  const auto bytes = encode(m);
  REQUIRE(bytes.size() == kHeaderSize + 2 + kTrailerSize);
  CHECK(bytes[0] == 0x54);
  CHECK(bytes[1] == 0x48);
  CHECK(bytes[2] == 0x01);
  CHECK(bytes[3] == 0x02);
  CHECK(read_le32(bytes, 4) == 7);
  CHECK(bytes[16] == 2);
  CHECK(bytes[17] == 0);
  // 500 permille, low byte first.
  CHECK(bytes[18] == 0xF4);
  CHECK(bytes[19] == 0x01);
}

TEST_CASE("payload sizes are fixed per type") {
  MessageFactory f(1);
  const std::array<std::size_t, 7> sizes = {24, 2, 28, 101, 4, 10, 2};
  for (int t = 0; t < 7; ++t) {
    const auto bytes = encode(f.make(t));
    CHECK(bytes.size() == kHeaderSize + sizes[t] + kTrailerSize);
    CHECK(payload_size(static_cast<std::uint8_t>(t + 1)) == sizes[t]);
  }
  CHECK_FALSE(payload_size(0).has_value());
  CHECK_FALSE(payload_size(8).has_value());
}

TEST_CASE("empty and truncated buffers need more bytes") {
  CHECK(decode({}).status == DecodeStatus::NeedMoreBytes);
  const auto bytes = encode(WireMessage{1, 2, ForceFeedback{1234}});
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    CHECK(decode(std::span(bytes).first(n)).status == DecodeStatus::NeedMoreBytes);
  }
}

TEST_CASE("roundtrip of 10^4 random messages across all types") {
  MessageFactory f(20240607);
  for (int i = 0; i < 10000; ++i) {
    const WireMessage m = f.make(i % 7);
    const auto bytes = encode(m);
    // Independent view of the frame: header fields at fixed offsets, trailer CRC.
    REQUIRE(bytes[3] == static_cast<std::uint8_t>(m.type()));
    REQUIRE(read_le32(bytes, 4) == m.seq);
    REQUIRE(read_le32(bytes, bytes.size() - 4) == oracle::crc32(bytes.data(), bytes.size() - 4));
    const auto res = decode(bytes);
    REQUIRE(res.status == DecodeStatus::Ok);
    REQUIRE(res.consumed == bytes.size());
    REQUIRE(*res.message == m);
  }
}

TEST_CASE("every single-bit flip is detected") {
  MessageFactory f(5);
  for (int t = 0; t < 7; ++t) {
    for (int rep = 0; rep < 4; ++rep) {
      const auto clean = encode(f.make(t));
      for (std::size_t bit = 0; bit < clean.size() * 8; ++bit) {
        auto bad = clean;
        bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        const auto res = decode(bad);
        CHECK(res.status != DecodeStatus::Ok);
        CHECK_FALSE(res.message.has_value());
      }
    }
  }
}

TEST_CASE("specific error classes") {
  auto bytes = encode(WireMessage{1, 2, ForceFeedback{5}});
  auto bad = bytes;
  bad[2] = 2;
  CHECK(decode(bad).status == DecodeStatus::BadVersion);
  bad = bytes;
  bad[0] = 0x00;
  CHECK(decode(bad).status == DecodeStatus::BadVersion);
  bad = bytes;
  bad[kHeaderSize] ^= 0x10;
  CHECK(decode(bad).status == DecodeStatus::Corrupt);

  // A well-formed frame with an unassigned type code and a valid CRC.
  bad = bytes;
  bad[3] = 0x42;
  const auto crc = oracle::crc32(bad.data(), bad.size() - 4);
  for (int i = 0; i < 4; ++i) bad[bad.size() - 4 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
  CHECK(decode(bad).status == DecodeStatus::UnknownType);
}

TEST_CASE("stream decoder reassembles byte-by-byte") {
  MessageFactory f(77);
  std::vector<WireMessage> sent;
  std::vector<std::vector<std::uint8_t>> frames;
  for (int i = 0; i < 50; ++i) {
    sent.push_back(f.make(i % 7));
    frames.push_back(encode(sent.back()));
  }
  const auto stream = concat(frames);
  StreamDecoder dec;
  std::vector<WireMessage> got;
  for (std::uint8_t b : stream) {
    dec.feed(std::span(&b, 1));
    while (auto r = dec.next()) {
      REQUIRE(r->status == DecodeStatus::Ok);
      got.push_back(*r->message);
    }
  }
  CHECK(got == sent);
  CHECK(dec.errors() == 0);
  CHECK(dec.buffered() == 0);
}

TEST_CASE("stream resynchronizes after one corrupted frame") {
  MessageFactory f(31337);
  for (std::size_t corrupt_at : {0u, 3u, 9u}) {
    for (std::size_t byte_offset : {0u, 1u, 5u, 18u, 30u}) {
      std::vector<WireMessage> sent;
      std::vector<std::vector<std::uint8_t>> frames;
      for (int i = 0; i < 10; ++i) {
        sent.push_back(f.make(i % 7));
        frames.push_back(encode(sent.back()));
      }
      auto& victim = frames[corrupt_at];
      victim[std::min(byte_offset, victim.size() - 1)] ^= 0x04;

      StreamDecoder dec;
      dec.feed(concat(frames));
      std::vector<WireMessage> got;
      int errors = 0;
      while (auto r = dec.next()) {
        if (r->status == DecodeStatus::Ok) got.push_back(*r->message);
        else ++errors;
      }
      std::vector<WireMessage> expected = sent;
      expected.erase(expected.begin() + static_cast<std::ptrdiff_t>(corrupt_at));
      CHECK(errors == 1);
      CHECK(got == expected);
    }
  }
}

TEST_CASE("sequence tracker surfaces gaps") {
  SequenceTracker t;
  for (std::uint32_t s : {1u, 2u, 3u, 6u, 7u, 5u, 8u}) t.observe(s);
  CHECK(t.gaps() == 1);
  CHECK(t.missing() == 2);
  CHECK(t.reordered() == 1);
}

TEST_CASE("quantization keeps twin precision") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-500.0, 500.0);
  for (int i = 0; i < 1000; ++i) {
    RobotTarget t;
    t.position_mm = Eigen::Vector3d(pos(rng), pos(rng), pos(rng));
    t.orientation_deg = Eigen::Vector3d(pos(rng), pos(rng), pos(rng)) * 0.3;
    const auto back = dequantize_pose(quantize_pose(t), 0);
    CHECK((back.position_mm - t.position_mm).cwiseAbs().maxCoeff() <= 0.0005 + 1e-12);
    CHECK((back.orientation_deg - t.orientation_deg).cwiseAbs().maxCoeff() <= 0.0005 + 1e-12);
  }
  CHECK(to_permille(0.5) == 500);
  CHECK(to_permille(-1.0) == 0);
  CHECK(to_permille(2.0) == 1000);
}

TEST_CASE("tactile cells survive the centinewton encoding") {
  TactileFrame f;
  f.finger = Finger::Right;
  f.cells.setConstant(0.0);
  f.cells(4, 2) = 9.0;
  f.cells(1, 1) = 1.25;
  const auto back = from_message(to_message(f), 42);
  CHECK(back.finger == Finger::Right);
  CHECK(back.timestamp_us == 42);
  CHECK(back.cells == f.cells);
}
