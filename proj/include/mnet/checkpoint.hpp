#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mnet/layers.hpp"

namespace mnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// One record of an MNETCKPT file: kind tag, shape list, f64 payload.
struct CheckpointRecord {
  std::uint32_t tag = 0;
  std::vector<std::uint32_t> shape;
  std::vector<double> payload;

  bool operator==(const CheckpointRecord&) const = default;
};

// Layout, all little-endian:
//   "MNETCKPT" | u32 version | u32 record count |
//   per record: u32 tag | u32 n | n x u32 shape | u64 m | m x f64 payload
void write_checkpoint(std::ostream& os, std::span<const CheckpointRecord> records);
std::vector<CheckpointRecord> read_checkpoint(std::istream& is);
void write_checkpoint_file(const std::string& path, std::span<const CheckpointRecord> records);
std::vector<CheckpointRecord> read_checkpoint_file(const std::string& path);

CheckpointRecord layer_to_record(Layer& layer);
std::unique_ptr<Layer> layer_from_record(const CheckpointRecord& record);

}  // namespace mnet
