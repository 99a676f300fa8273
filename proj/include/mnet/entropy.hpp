#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mnet/channel.hpp"

namespace mnet {

/// Uniform b-bit binning of [lo, hi]: code = floor((x - lo) / (hi - lo) * 2^b),
/// clamped to [0, 2^b - 1]. A degenerate range maps everything to code 0.
struct BinQuantizer {
  double lo = -1.0;
  double hi = 1.0;
  unsigned bits = 14;

  static BinQuantizer fit(std::span<const double> values, unsigned bits);
  std::uint32_t code(double x) const;
};

struct EntropyEstimate {
  double bits = 0.0;              // plugin entropy, bits per element
  std::size_t occupied_bins = 0;
  std::size_t samples = 0;
};

/// Plugin entropy of the binned samples (range from the samples themselves).
EntropyEstimate element_entropy(std::span<const double> samples, unsigned bits);
EntropyEstimate element_entropy(std::span<const double> samples, const BinQuantizer& q);
EntropyEstimate code_entropy(std::span<const std::uint32_t> codes);

struct ConditionalEntropy {
  double conditional = 0.0;  // H(X_t | X_{t-delta})
  double joint = 0.0;        // H(X_{t-delta}, X_t)
  double marginal = 0.0;     // H(X_{t-delta})
  std::size_t occupied_joint = 0;
  std::size_t samples = 0;
};

/// Plugin H(cur | prev). The conditional term is summed directly, so
/// joint == marginal + conditional is a checkable identity.
ConditionalEntropy conditional_entropy(std::span<const double> prev, std::span<const double> cur, unsigned bits);
ConditionalEntropy conditional_entropy(std::span<const double> prev, std::span<const double> cur,
                                       const BinQuantizer& q);
ConditionalEntropy conditional_code_entropy(std::span<const std::uint32_t> prev, std::span<const std::uint32_t> cur);

struct EntropyRow {
  std::optional<std::size_t> delta;  // empty for the unconditional row
  unsigned bits = 0;
  double avg_entropy = 0.0;          // averaged over all 2*Rd*Nb real elements
  double avg_occupied_bins = 0.0;
  std::size_t samples = 0;           // pairs per element
};

/// One row per delta plus a trailing unconditional row. Every row uses target
/// slots t in [max delta, T) so all rows see the same targets. The binning
/// range is the global min/max of the dataset.
std::vector<EntropyRow> entropy_sweep(const CsiSequence& data, std::span<const std::size_t> deltas, unsigned bits);

void write_entropy_csv(std::ostream& os, std::span<const EntropyRow> rows);

}  // namespace mnet
