#pragma once

#include <cstddef>
#include <deque>
#include <functional>

#include "mnet/tensor.hpp"

namespace mnet {

/// Records differentiable operations in execution order and replays their
/// backward rules in reverse.
///
/// The tape owns every intermediate tensor produced while it is alive, so
/// references returned by ops stay valid until `clear()`. A tape constructed
/// with `recording == false` still owns intermediates but records nothing,
/// which is what inference uses.
class Tape {
 public:
  explicit Tape(bool recording = true);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }

  /// Takes ownership of an op output. The returned reference is stable.
  Tensor& keep(Tensor t);
  /// Appends a backward rule. Ignored when not recording.
  void record(std::function<void()> rule);

  /// Seeds d(root)/d(root) = 1 and runs every recorded rule once, newest
  /// first. The rules are consumed; a second call without new ops throws.
  void backward(Tensor& root);

  std::size_t op_count() const noexcept { return rules_.size(); }
  void clear();

 private:
  bool recording_;
  std::deque<Tensor> values_;
  std::deque<std::function<void()>> rules_;
  bool consumed_ = false;
};

}  // namespace mnet
