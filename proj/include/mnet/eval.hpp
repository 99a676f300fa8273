#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "mnet/markovnet.hpp"

namespace mnet {

struct Nmse {
  double linear = 0.0;
  /// 10 log10(linear); -infinity for a perfect reconstruction.
  double db = -std::numeric_limits<double>::infinity();
  std::size_t used = 0;      // samples averaged
  std::size_t excluded = 0;  // zero-norm truth samples skipped
};

double to_db(double linear);

/// Mean over samples of ||truth_k - recon_k||^2 / ||truth_k||^2. Zero-norm
/// truth samples are skipped and counted; all of them zero is an error.
Nmse nmse(const Tensor& truth, const Tensor& recon);

std::vector<Nmse> per_slot_nmse(const PipelineRun& run);

}  // namespace mnet
