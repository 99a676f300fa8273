#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mnet/markovnet.hpp"
#include "mnet/ops.hpp"

namespace mnet {

/// Builds a scalar loss on the given tape.
using LossFn = std::function<Tensor&(Tape&)>;

/// Largest normwise relative error ||analytic - fd|| / ||fd|| over the
/// tensors in `wrt`, using central differences with step h on every element.
/// A tensor whose true gradient is zero is compared in absolute terms.
double gradcheck(const LossFn& loss, const std::vector<Tensor*>& wrt, double h = 1e-5);

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

struct OpCheck {
  std::string op;
  double error = 0.0;  // gradcheck result
};

/// Finite-difference check of every differentiable op on inputs drawn from
/// `seed`. Each loss is a random projection of the op output.
std::vector<OpCheck> op_gradient_suite(std::uint64_t seed);

struct PcaOracleResult {
  double pca_error = 0.0;      // mean per-sample squared error of the best rank-`latent` projection
  double trained_error = 0.0;  // same measure for the trained linear codec
  double relative_gap() const { return trained_error / pca_error - 1.0; }
};

struct PcaOracleOptions {
  std::size_t samples = 2000;
  std::size_t epochs = 150;
  std::size_t batch = 50;
  double learning_rate = 3e-3;
  std::uint64_t seed = 17;
};

/// Trains a linear bias-free FC codec (64-d input, latent 16) on Gaussian
/// data with a decaying spectrum and compares it with truncated
/// eigendecomposition of the uncentred second-moment matrix.
PcaOracleResult pca_oracle_check(const PcaOracleOptions& options = {});

/// Largest per-slot NMSE (linear) of an identity-codec pipeline with exact
/// magnitudes, for both spherical settings.
double identity_pipeline_check(const CsiSequence& data);

}  // namespace mnet
