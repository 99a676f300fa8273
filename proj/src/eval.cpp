#include "mnet/eval.hpp"

#include <cmath>

#include "mnet/error.hpp"

namespace mnet {

double to_db(double linear) {
  if (linear == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(linear);
}

Nmse nmse(const Tensor& truth, const Tensor& recon) {
  MNET_REQUIRE(truth.shape() == recon.shape(),
               "nmse shape mismatch " + shape_str(truth.shape()) + " vs " + shape_str(recon.shape()));
  MNET_REQUIRE(truth.rank() >= 1 && truth.size() > 0, "nmse needs a batch");
  const std::size_t n = truth.dim(0), per = truth.size() / n;
  Nmse r;
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = k * per; i < (k + 1) * per; ++i) {
      const double d = truth[i] - recon[i];
      num += d * d;
      den += truth[i] * truth[i];
    }
    if (den == 0.0) {
      ++r.excluded;
      continue;
    }
    acc += num / den;
    ++r.used;
  }
  if (r.used == 0) throw ContractViolation("every truth sample has zero norm");
  r.linear = acc / static_cast<double>(r.used);
  r.db = to_db(r.linear);
  return r;
}

std::vector<Nmse> per_slot_nmse(const PipelineRun& run) {
  std::vector<Nmse> out;
  for (std::size_t t = 0; t < run.truth.size(); ++t) out.push_back(nmse(run.truth[t], run.reconstructions[t]));
  return out;
}

}  // namespace mnet
