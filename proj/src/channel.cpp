#include "mnet/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "mnet/binary_io.hpp"
#include "mnet/error.hpp"

namespace mnet {

void ChannelConfig::validate() const {
  MNET_REQUIRE(antennas >= 1 && rows >= 1 && slots >= 1, "channel extents must be positive");
  MNET_REQUIRE(rows <= subcarriers, "retained rows exceed subcarrier count");
  MNET_REQUIRE(gamma >= 0.0 && gamma < 1.0, "gamma must lie in [0,1)");
  MNET_REQUIRE(num_paths >= 1 && num_paths <= rows * antennas, "num_paths must lie in [1, rows*antennas]");
  MNET_REQUIRE(path_decay >= 0.0 && std::isfinite(path_decay), "path_decay must be finite and non-negative");
  MNET_REQUIRE(angle_spread >= 0.0 && std::isfinite(angle_spread), "angle_spread must be finite and non-negative");
  MNET_REQUIRE(power_spread_db >= 0.0 && std::isfinite(power_spread_db), "power_spread_db must be non-negative");
}

ChannelConfig preset_config(const std::string& name) {
  ChannelConfig c;
  if (name == "slow") {
    c.gamma = 0.99;
  } else if (name == "fast") {
    c.gamma = 0.9;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected slow or fast)");
  }
  c.preset = name;
  return c;
}

std::span<const cplx> CsiSequence::matrix(std::size_t k, std::size_t t) const {
  MNET_REQUIRE(k < samples && t < slots, "sample or slot index out of range");
  return {values.data() + (k * slots + t) * matrix_size(), matrix_size()};
}

std::span<cplx> CsiSequence::matrix(std::size_t k, std::size_t t) {
  MNET_REQUIRE(k < samples && t < slots, "sample or slot index out of range");
  return {values.data() + (k * slots + t) * matrix_size(), matrix_size()};
}

void CsiSequence::check() const {
  MNET_REQUIRE(values.size() == samples * slots * matrix_size(), "dataset buffer size mismatch");
  MNET_REQUIRE(power_db.size() == samples && seeds.size() == samples, "dataset metadata size mismatch");
}

CsiSequence CsiSequence::subset(std::size_t begin, std::size_t end) const {
  MNET_REQUIRE(begin < end && end <= samples, "bad sample range");
  CsiSequence out = *this;
  const std::size_t per = slots * matrix_size();
  out.samples = end - begin;
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin * per),
                    values.begin() + static_cast<std::ptrdiff_t>(end * per));
  out.power_db.assign(power_db.begin() + static_cast<std::ptrdiff_t>(begin),
                      power_db.begin() + static_cast<std::ptrdiff_t>(end));
  out.seeds.assign(seeds.begin() + static_cast<std::ptrdiff_t>(begin), seeds.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

Tensor CsiSequence::slot_tensor(std::size_t t) const {
  MNET_REQUIRE(t < slots, "slot index out of range");
  std::vector<cplx> buf;
  buf.reserve(samples * matrix_size());
  for (std::size_t k = 0; k < samples; ++k) {
    auto m = matrix(k, t);
    buf.insert(buf.end(), m.begin(), m.end());
  }
  return complex_to_real(buf, samples, rows, cols);
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t k) {
  // splitmix64 over (seed, k)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(k) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

struct Cell {
  std::size_t row, col;
  double power;
};

std::vector<Cell> draw_support(const ChannelConfig& c, std::mt19937_64& rng) {
  std::vector<double> row_weight(c.rows);
  for (std::size_t r = 0; r < c.rows; ++r) row_weight[r] = std::exp(-c.path_decay * static_cast<double>(r));
  std::discrete_distribution<std::size_t> pick_row(row_weight.begin(), row_weight.end());
  std::uniform_int_distribution<std::size_t> pick_col(0, c.antennas - 1);
  std::normal_distribution<double> offset(0.0, c.angle_spread);
  const auto centre = static_cast<long long>(pick_col(rng));
  const auto nb = static_cast<long long>(c.antennas);

  std::set<std::pair<std::size_t, std::size_t>> taken;
  std::vector<Cell> cells;
  std::size_t attempts = 0;
  while (cells.size() < c.num_paths) {
    const std::size_t r = pick_row(rng);
    std::size_t a;
    if (attempts++ < 64 * c.num_paths) {
      a = static_cast<std::size_t>(((centre + std::llround(offset(rng))) % nb + nb) % nb);
    } else {
      a = pick_col(rng);  // cluster exhausted; spread out
    }
    if (taken.insert({r, a}).second) cells.push_back({r, a, row_weight[r]});
  }
  double total = 0.0;
  for (const auto& cell : cells) total += cell.power;
  for (auto& cell : cells) cell.power /= total;
  return cells;
}

}  // namespace

CsiSequence generate(const ChannelConfig& c, std::size_t samples) {
  c.validate();
  MNET_REQUIRE(samples >= 1, "need at least one sample");
  CsiSequence out;
  out.samples = samples;
  out.slots = c.slots;
  out.rows = c.rows;
  out.cols = c.antennas;
  out.gamma = c.gamma;
  out.preset = c.preset;
  out.values.assign(samples * c.slots * out.matrix_size(), cplx{});
  out.power_db.resize(samples);
  out.seeds.resize(samples);

  const double innovation = std::sqrt(1.0 - c.gamma * c.gamma);
  for (std::size_t k = 0; k < samples; ++k) {
    const std::uint64_t s = sample_seed(c.seed, k);
    out.seeds[k] = s;
    std::mt19937_64 rng(s);
    std::uniform_real_distribution<double> db(-0.5 * c.power_spread_db, 0.5 * c.power_spread_db);
    out.power_db[k] = c.power_spread_db > 0.0 ? db(rng) : 0.0;
    const double amp = std::pow(10.0, out.power_db[k] / 20.0);
    const auto cells = draw_support(c, rng);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&](double power) {
      const double sd = std::sqrt(power / 2.0);
      const double re = gauss(rng);
      const double im = gauss(rng);
      return cplx{sd * re, sd * im};
    };

    std::vector<cplx> state(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) state[i] = draw(cells[i].power);
    for (std::size_t t = 0; t < c.slots; ++t) {
      if (t > 0) {
        for (std::size_t i = 0; i < cells.size(); ++i)
          state[i] = c.gamma * state[i] + innovation * draw(cells[i].power);
      }
      auto m = out.matrix(k, t);
      for (std::size_t i = 0; i < cells.size(); ++i) m[cells[i].row * c.antennas + cells[i].col] = amp * state[i];
    }
  }
  return out;
}

namespace {
constexpr char kMagic[9] = "CSIDSET1";
}

void save_dataset(const CsiSequence& d, const std::string& path) {
  d.check();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  bin::put_magic(os, kMagic);
  for (std::size_t v : {d.samples, d.slots, d.rows, d.cols}) bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  bin::put<double>(os, d.gamma);
  bin::put<std::uint32_t>(os, static_cast<std::uint32_t>(d.preset.size()));
  os.write(d.preset.data(), static_cast<std::streamsize>(d.preset.size()));
  for (const cplx& v : d.values) {
    bin::put<float>(os, static_cast<float>(v.real()));
    bin::put<float>(os, static_cast<float>(v.imag()));
  }
  for (std::size_t k = 0; k < d.samples; ++k) {
    bin::put<double>(os, d.power_db[k]);
    bin::put<std::uint64_t>(os, d.seeds[k]);
  }
  if (!os) throw IoError("failed writing " + path);
}

CsiSequence load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset " + path);
  bin::expect_magic(is, kMagic);
  CsiSequence d;
  d.samples = bin::get<std::uint32_t>(is, "sample count");
  d.slots = bin::get<std::uint32_t>(is, "slot count");
  d.rows = bin::get<std::uint32_t>(is, "rows");
  d.cols = bin::get<std::uint32_t>(is, "cols");
  if (d.samples == 0 || d.slots == 0 || d.rows == 0 || d.cols == 0) throw IoError("dataset has a zero extent");
  d.gamma = bin::get<double>(is, "gamma");
  const auto n = bin::get<std::uint32_t>(is, "preset length");
  if (n > 4096) throw IoError("implausible preset name length");
  d.preset.resize(n);
  is.read(d.preset.data(), n);
  if (!is) throw IoError("truncated dataset header");
  d.values.resize(d.samples * d.slots * d.matrix_size());
  for (cplx& v : d.values) {
    const float re = bin::get<float>(is, "dataset values");
    const float im = bin::get<float>(is, "dataset values");
    v = {re, im};
  }
  d.power_db.resize(d.samples);
  d.seeds.resize(d.samples);
  for (std::size_t k = 0; k < d.samples; ++k) {
    d.power_db[k] = bin::get<double>(is, "sample metadata");
    d.seeds[k] = bin::get<std::uint64_t>(is, "sample metadata");
  }
  return d;
}

void save_dataset_manifest(const ChannelConfig& c, std::size_t samples, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.precision(17);
  os << "format=CSIDSET1\n"
     << "preset=" << c.preset << "\n"
     << "samples=" << samples << "\n"
     << "slots=" << c.slots << "\n"
     << "rows=" << c.rows << "\n"
     << "antennas=" << c.antennas << "\n"
     << "subcarriers=" << c.subcarriers << "\n"
     << "gamma=" << c.gamma << "\n"
     << "num_paths=" << c.num_paths << "\n"
     << "path_decay=" << c.path_decay << "\n"
     << "angle_spread=" << c.angle_spread << "\n"
     << "power_spread_db=" << c.power_spread_db << "\n"
     << "seed=" << c.seed << "\n";
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace mnet
