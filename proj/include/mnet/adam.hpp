#pragma once

#include <cstdint>
#include <vector>

#include "mnet/tensor.hpp"

namespace mnet {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers for one parameter list, in the list's order.
struct AdamState {
  AdamOptions options;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update. Every parameter must carry a gradient.
void adam_step(const std::vector<Tensor*>& params, AdamState& state);

class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamOptions options = {});

  void step() { adam_step(params_, state_); }
  void zero_grad();
  const AdamState& state() const noexcept { return state_; }

 private:
  std::vector<Tensor*> params_;
  AdamState state_;
};

}  // namespace mnet
