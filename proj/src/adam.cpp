#include "mnet/adam.hpp"

#include <cmath>

#include "mnet/error.hpp"

namespace mnet {

void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->size(), 0.0);
      state.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  MNET_REQUIRE(state.first_moment.size() == params.size(), "Adam state was built for a different parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    MNET_REQUIRE(params[i]->has_grad(), "adam_step: parameter " + std::to_string(i) + " has no gradient");
    MNET_REQUIRE(state.first_moment[i].size() == params[i]->size(), "Adam moment buffer shape mismatch");
  }

  const auto& o = state.options;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->data();
    auto g = params[i]->grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
  }
}

Adam::Adam(std::vector<Tensor*> params, AdamOptions options) : params_(std::move(params)) {
  state_.options = options;
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

}  // namespace mnet
