#include "mnet/tape.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <mutex>

#include "mnet/error.hpp"

namespace mnet {

namespace {
// Tape intermediates are tens of megabytes and die after every minibatch.
// glibc would hand them back to the kernel and refault them on the next
// batch, which costs more than the arithmetic in the elementwise ops.
void keep_large_blocks_mapped() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  });
#endif
}
}  // namespace

Tape::Tape(bool recording) : recording_(recording) { keep_large_blocks_mapped(); }

Tensor& Tape::keep(Tensor t) {
  values_.push_back(std::move(t));
  return values_.back();
}

void Tape::record(std::function<void()> rule) {
  if (!recording_) return;
  rules_.push_back(std::move(rule));
  consumed_ = false;
}

void Tape::backward(Tensor& root) {
  MNET_REQUIRE(recording_, "backward on a non-recording tape");
  MNET_REQUIRE(root.size() == 1, "backward root must be a scalar, got " + shape_str(root.shape()));
  MNET_REQUIRE(!consumed_, "tape already replayed; record a new forward pass first");
  MNET_REQUIRE(root.requires_grad(), "backward root does not depend on any trainable tensor");
  root.ensure_grad()[0] += 1.0;
  while (!rules_.empty()) {
    auto rule = std::move(rules_.back());
    rules_.pop_back();
    rule();
  }
  consumed_ = true;
}

void Tape::clear() {
  rules_.clear();
  values_.clear();
  consumed_ = false;
}

}  // namespace mnet
