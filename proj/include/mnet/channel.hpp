#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mnet/tensor.hpp"
#include "mnet/transform.hpp"

namespace mnet {

struct ChannelConfig {
  std::size_t antennas = 32;      // Nb
  std::size_t subcarriers = 1024; // Nf
  std::size_t rows = 32;          // retained delay rows Rd
  double gamma = 0.99;            // AR(1) coefficient, [0,1)
  std::size_t num_paths = 16;     // occupied (delay, angle) cells per UE
  double path_decay = 0.3;        // mean power ~ exp(-path_decay * delay_row)
  double angle_spread = 2.0;      // std-dev in angle bins around the UE's centre
  double power_spread_db = 40.0;  // per-UE path loss, uniform in dB over this width
  std::size_t slots = 10;         // T
  std::uint64_t seed = 1;
  std::string preset = "custom";

  void validate() const;
};

/// "slow" (gamma 0.99) or "fast" (gamma 0.9); everything else default.
ChannelConfig preset_config(const std::string& name);

/// K sequences of T angular-delay matrices, stored sample-major then slot-major.
struct CsiSequence {
  std::size_t samples = 0;
  std::size_t slots = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double gamma = 0.0;
  std::string preset;
  std::vector<cplx> values;
  std::vector<double> power_db;       // per-sample path-loss offset
  std::vector<std::uint64_t> seeds;   // per-sample generator seed

  std::size_t matrix_size() const { return rows * cols; }
  std::span<const cplx> matrix(std::size_t k, std::size_t t) const;
  std::span<cplx> matrix(std::size_t k, std::size_t t);
  /// Samples [begin, end).
  CsiSequence subset(std::size_t begin, std::size_t end) const;
  /// Slot t of every sample as a real [K,2,rows,cols] tensor.
  Tensor slot_tensor(std::size_t t) const;
  void check() const;
};

CsiSequence generate(const ChannelConfig& config, std::size_t samples);

/// Seed used for sample k; independent of how many samples are drawn.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t k);

// "CSIDSET1" | u32 K,T,Rd,Nb | f64 gamma | u32 n + n bytes preset |
// K*T*Rd*Nb complex as f32 re,im | K x (f64 power_db, u64 seed)
void save_dataset(const CsiSequence& data, const std::string& path);
CsiSequence load_dataset(const std::string& path);
/// Text key=value description written next to a dataset.
void save_dataset_manifest(const ChannelConfig& config, std::size_t samples, const std::string& path);

}  // namespace mnet
