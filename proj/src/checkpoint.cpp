#include "mnet/checkpoint.hpp"

#include <fstream>

#include "mnet/binary_io.hpp"

namespace mnet {

namespace {
constexpr char kMagic[9] = "MNETCKPT";
}

void write_checkpoint(std::ostream& os, std::span<const CheckpointRecord> records) {
  bin::put_magic(os, kMagic);
  bin::put<std::uint32_t>(os, kCheckpointVersion);
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    bin::put<std::uint32_t>(os, r.tag);
    bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(r.shape.size()));
    for (std::uint32_t d : r.shape) bin::put<std::uint32_t>(os, d);
    bin::put<std::uint64_t>(os, r.payload.size());
    for (double v : r.payload) bin::put<double>(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint");
}

std::vector<CheckpointRecord> read_checkpoint(std::istream& is) {
  bin::expect_magic(is, kMagic);
  const auto version = bin::get<std::uint32_t>(is, "checkpoint version");
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto count = bin::get<std::uint32_t>(is, "record count");
  std::vector<CheckpointRecord> out(count);
  for (auto& r : out) {
    r.tag = bin::get<std::uint32_t>(is, "record tag");
    r.shape.resize(bin::get<std::uint32_t>(is, "shape length"));
    for (auto& d : r.shape) d = bin::get<std::uint32_t>(is, "shape entry");
    const auto m = bin::get<std::uint64_t>(is, "payload length");
    if (m > (std::uint64_t{1} << 32)) throw IoError("implausible checkpoint payload length");
    r.payload.resize(m);
    for (auto& v : r.payload) v = bin::get<double>(is, "payload");
  }
  return out;
}

void write_checkpoint_file(const std::string& path, std::span<const CheckpointRecord> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_checkpoint(os, records);
}

std::vector<CheckpointRecord> read_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

CheckpointRecord layer_to_record(Layer& layer) {
  CheckpointRecord r;
  r.tag = static_cast<std::uint32_t>(layer.kind());
  r.shape = layer.config();
  for (Tensor* t : layer.state()) r.payload.insert(r.payload.end(), t->data().begin(), t->data().end());
  return r;
}

namespace {
void load_state(Layer& layer, const CheckpointRecord& r) {
  std::size_t need = 0;
  for (Tensor* t : layer.state()) need += t->size();
  if (need != r.payload.size())
    throw IoError(std::string("payload size mismatch for ") + layer_kind_name(layer.kind()) + " record");
  std::size_t off = 0;
  for (Tensor* t : layer.state()) {
    std::copy_n(r.payload.begin() + static_cast<std::ptrdiff_t>(off), t->size(), t->data().begin());
    off += t->size();
  }
}
}  // namespace

std::unique_ptr<Layer> layer_from_record(const CheckpointRecord& r) {
  const auto& s = r.shape;
  std::unique_ptr<Layer> layer;
  switch (static_cast<LayerKind>(r.tag)) {
    case LayerKind::kConv2d:
      if (s.size() != 5) throw IoError("conv2d record needs 5 shape entries");
      layer = std::make_unique<Conv2dLayer>(s[1], s[0], s[2], s[3], s[4] != 0);
      break;
    case LayerKind::kAffine:
      if (s.size() != 3) throw IoError("affine record needs 3 shape entries");
      layer = std::make_unique<AffineLayer>(s[1], s[0], s[2] != 0);
      break;
    case LayerKind::kBatchNorm:
      if (s.size() != 1) throw IoError("batch_norm record needs 1 shape entry");
      layer = std::make_unique<BatchNormLayer>(s[0]);
      break;
    case LayerKind::kLeakyRelu:
      layer = std::make_unique<LeakyReluLayer>(0.0);
      break;
    case LayerKind::kTanh:
      layer = std::make_unique<TanhLayer>();
      break;
    case LayerKind::kReshape: {
      if (s.empty()) throw IoError("reshape record needs a target shape");
      layer = std::make_unique<ReshapeLayer>(Shape(s.begin(), s.end()));
      break;
    }
    default:
      throw IoError("unknown layer tag " + std::to_string(r.tag));
  }
  load_state(*layer, r);
  return layer;
}

}  // namespace mnet
