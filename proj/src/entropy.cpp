#include "mnet/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "mnet/error.hpp"

namespace mnet {

BinQuantizer BinQuantizer::fit(std::span<const double> values, unsigned bits) {
  MNET_REQUIRE(!values.empty(), "cannot fit a bin range to no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi, bits};
}

std::uint32_t BinQuantizer::code(double x) const {
  MNET_REQUIRE(bits >= 1 && bits <= 24, "entropy quantizer bits must lie in [1,24]");
  if (!(hi > lo)) return 0;
  const double levels = std::ldexp(1.0, static_cast<int>(bits));
  const double c = std::floor((x - lo) / (hi - lo) * levels);
  return static_cast<std::uint32_t>(std::clamp(c, 0.0, levels - 1.0));
}

namespace {

// Plugin entropy from counts: log2 n - (1/n) sum c log2 c.
template <typename Map>
double plugin(const Map& counts, std::size_t n) {
  const double dn = static_cast<double>(n);
  double acc = 0.0;
  for (const auto& [key, c] : counts) {
    (void)key;
    const double dc = static_cast<double>(c);
    acc += dc * std::log2(dc);
  }
  return std::log2(dn) - acc / dn;
}

std::vector<std::uint32_t> codes_of(std::span<const double> v, const BinQuantizer& q) {
  std::vector<std::uint32_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = q.code(v[i]);
  return out;
}

}  // namespace

EntropyEstimate code_entropy(std::span<const std::uint32_t> codes) {
  MNET_REQUIRE(codes.size() >= 2, "entropy needs at least 2 samples");
  std::unordered_map<std::uint32_t, std::size_t> counts;
  for (auto c : codes) ++counts[c];
  return {plugin(counts, codes.size()), counts.size(), codes.size()};
}

EntropyEstimate element_entropy(std::span<const double> samples, const BinQuantizer& q) {
  MNET_REQUIRE(samples.size() >= 2, "entropy needs at least 2 samples");
  return code_entropy(codes_of(samples, q));
}

EntropyEstimate element_entropy(std::span<const double> samples, unsigned bits) {
  MNET_REQUIRE(samples.size() >= 2, "entropy needs at least 2 samples");
  return element_entropy(samples, BinQuantizer::fit(samples, bits));
}

ConditionalEntropy conditional_code_entropy(std::span<const std::uint32_t> prev, std::span<const std::uint32_t> cur) {
  MNET_REQUIRE(prev.size() == cur.size(), "pair halves differ in length");
  MNET_REQUIRE(prev.size() >= 2, "conditional entropy needs at least 2 pairs");
  const std::size_t n = prev.size();
  std::unordered_map<std::uint64_t, std::size_t> joint;
  std::unordered_map<std::uint32_t, std::size_t> marg;
  joint.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ++joint[(static_cast<std::uint64_t>(prev[i]) << 32) | cur[i]];
    ++marg[prev[i]];
  }
  ConditionalEntropy r;
  r.samples = n;
  r.occupied_joint = joint.size();
  r.joint = plugin(joint, n);
  r.marginal = plugin(marg, n);
  double acc = 0.0;
  for (const auto& [key, c] : joint) {
    const double cx = static_cast<double>(marg.at(static_cast<std::uint32_t>(key >> 32)));
    acc += static_cast<double>(c) * std::log2(cx / static_cast<double>(c));
  }
  r.conditional = acc / static_cast<double>(n);
  return r;
}

ConditionalEntropy conditional_entropy(std::span<const double> prev, std::span<const double> cur,
                                       const BinQuantizer& q) {
  MNET_REQUIRE(prev.size() == cur.size(), "pair halves differ in length");
  MNET_REQUIRE(prev.size() >= 2, "conditional entropy needs at least 2 pairs");
  return conditional_code_entropy(codes_of(prev, q), codes_of(cur, q));
}

ConditionalEntropy conditional_entropy(std::span<const double> prev, std::span<const double> cur, unsigned bits) {
  MNET_REQUIRE(!prev.empty() && !cur.empty(), "conditional entropy needs at least 2 pairs");
  BinQuantizer q = BinQuantizer::fit(prev, bits);
  const BinQuantizer qc = BinQuantizer::fit(cur, bits);
  q.lo = std::min(q.lo, qc.lo);
  q.hi = std::max(q.hi, qc.hi);
  return conditional_entropy(prev, cur, q);
}

std::vector<EntropyRow> entropy_sweep(const CsiSequence& data, std::span<const std::size_t> deltas, unsigned bits) {
  data.check();
  MNET_REQUIRE(!deltas.empty(), "need at least one delta");
  std::size_t dmax = 0;
  for (std::size_t d : deltas) {
    MNET_REQUIRE(d >= 1 && d < data.slots, "delta must lie in [1, T)");
    dmax = std::max(dmax, d);
  }

  BinQuantizer q{0.0, 0.0, bits};
  {
    double lo = data.values.front().real(), hi = lo;
    for (const cplx& v : data.values) {
      lo = std::min({lo, v.real(), v.imag()});
      hi = std::max({hi, v.real(), v.imag()});
    }
    q.lo = lo;
    q.hi = hi;
  }

  const std::size_t plane = data.matrix_size();
  const std::size_t k_count = data.samples, t_count = data.slots;
  const std::size_t targets = k_count * (t_count - dmax);
  MNET_REQUIRE(targets >= 2, "too few target samples for the sweep");

  std::vector<EntropyRow> rows(deltas.size() + 1);
  for (std::size_t i = 0; i < deltas.size(); ++i) rows[i].delta = deltas[i];
  for (auto& r : rows) {
    r.bits = bits;
    r.samples = targets;
  }

  std::vector<std::uint32_t> codes(k_count * t_count);
  std::vector<std::uint32_t> prev(targets), cur(targets);
  const std::size_t elements = 2 * plane;
  for (std::size_t e = 0; e < elements; ++e) {
    const std::size_t cell = e % plane;
    const bool imag = e >= plane;
    for (std::size_t k = 0; k < k_count; ++k)
      for (std::size_t t = 0; t < t_count; ++t) {
        const cplx v = data.values[(k * t_count + t) * plane + cell];
        codes[k * t_count + t] = q.code(imag ? v.imag() : v.real());
      }
    std::size_t j = 0;
    for (std::size_t k = 0; k < k_count; ++k)
      for (std::size_t t = dmax; t < t_count; ++t) cur[j++] = codes[k * t_count + t];

    for (std::size_t i = 0; i < deltas.size(); ++i) {
      j = 0;
      for (std::size_t k = 0; k < k_count; ++k)
        for (std::size_t t = dmax; t < t_count; ++t) prev[j++] = codes[k * t_count + t - deltas[i]];
      const auto c = conditional_code_entropy(prev, cur);
      rows[i].avg_entropy += c.conditional;
      rows[i].avg_occupied_bins += static_cast<double>(c.occupied_joint);
    }
    const auto u = code_entropy(cur);
    rows.back().avg_entropy += u.bits;
    rows.back().avg_occupied_bins += static_cast<double>(u.occupied_bins);
  }
  for (auto& r : rows) {
    r.avg_entropy /= static_cast<double>(elements);
    r.avg_occupied_bins /= static_cast<double>(elements);
  }
  return rows;
}

void write_entropy_csv(std::ostream& os, std::span<const EntropyRow> rows) {
  os << "delta_slots,bits,avg_conditional_entropy,avg_occupied_bins,samples\n";
  const auto prec = os.precision(10);
  for (const auto& r : rows) {
    if (r.delta)
      os << *r.delta;
    else
      os << "inf";
    os << ',' << r.bits << ',' << r.avg_entropy << ',' << r.avg_occupied_bins << ',' << r.samples << '\n';
  }
  os.precision(prec);
}

}  // namespace mnet
