#include "telehaptic/transport.hpp"

#include <mutex>

namespace telehaptic {

namespace {

struct LoopbackShared {
  std::mutex mutex;
  std::vector<std::uint8_t> to_b;
  std::vector<std::uint8_t> to_a;
  bool closed = false;
};

class LoopbackEnd final : public ByteStream {
 public:
  LoopbackEnd(std::shared_ptr<LoopbackShared> shared, bool is_a)
      : shared_(std::move(shared)), is_a_(is_a) {}

  ~LoopbackEnd() override { close(); }

  void write(std::span<const std::uint8_t> bytes) override {
    std::lock_guard lock(shared_->mutex);
    if (shared_->closed) return;
    auto& out = is_a_ ? shared_->to_b : shared_->to_a;
    out.insert(out.end(), bytes.begin(), bytes.end());
  }

  std::vector<std::uint8_t> read_available() override {
    std::lock_guard lock(shared_->mutex);
    std::vector<std::uint8_t> out;
    out.swap(is_a_ ? shared_->to_a : shared_->to_b);
    return out;
  }

  bool is_open() const override {
    std::lock_guard lock(shared_->mutex);
    return !shared_->closed;
  }

  void close() override {
    std::lock_guard lock(shared_->mutex);
    shared_->closed = true;
  }

 private:
  std::shared_ptr<LoopbackShared> shared_;
  bool is_a_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback_pair() {
  auto shared = std::make_shared<LoopbackShared>();
  return {std::make_unique<LoopbackEnd>(shared, true), std::make_unique<LoopbackEnd>(shared, false)};
}

}  // namespace telehaptic
