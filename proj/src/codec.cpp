#include "mnet/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "mnet/error.hpp"

namespace mnet {

Ratio Ratio::parse(const std::string& text) {
  auto fail = [&]() -> Ratio { throw ConfigError("cannot parse compression ratio '" + text + "'"); };
  try {
    std::size_t used = 0;
    if (auto slash = text.find('/'); slash != std::string::npos) {
      const unsigned long num = std::stoul(text.substr(0, slash), &used);
      if (used != slash) return fail();
      const std::string rest = text.substr(slash + 1);
      const unsigned long den = std::stoul(rest, &used);
      if (used != rest.size() || num == 0 || den == 0 || num > den) return fail();
      return {static_cast<std::uint32_t>(num), static_cast<std::uint32_t>(den)};
    }
    if (text.find('.') != std::string::npos) {
      const double v = std::stod(text, &used);
      if (used != text.size() || !(v > 0.0) || v > 1.0) return fail();
      const double inv = std::round(1.0 / v);
      if (std::abs(1.0 / inv - v) > 1e-9) return fail();
      return {1, static_cast<std::uint32_t>(inv)};
    }
    const unsigned long den = std::stoul(text, &used);
    if (used != text.size() || den == 0) return fail();
    return {1, static_cast<std::uint32_t>(den)};
  } catch (const std::logic_error&) {
    return fail();
  }
}

const char* head_name(LatentHead head) { return head == LatentHead::kCnn ? "cnn" : "fc"; }

LatentHead parse_head(const std::string& text) {
  if (text == "fc") return LatentHead::kFc;
  if (text == "cnn") return LatentHead::kCnn;
  throw ConfigError("unknown latent head '" + text + "' (expected fc or cnn)");
}

std::size_t CodecConfig::head_maps() const {
  const std::size_t maps = 2 * rows;
  if ((maps * ratio.num) % ratio.den != 0)
    throw ConfigError("CNN head needs 64*CR to be an integer, got " + std::to_string(maps) + "*" + ratio.str());
  return maps * ratio.num / ratio.den;
}

std::size_t CodecConfig::latent_length() const {
  if (head == LatentHead::kCnn && !linear) return head_maps() * cols;
  const std::size_t n = input_length();
  if ((n * ratio.num) % ratio.den != 0)
    throw ConfigError("latent length " + std::to_string(n) + "*" + ratio.str() + " is not an integer");
  return n * ratio.num / ratio.den;
}

void CodecConfig::validate() const {
  if (rows == 0 || cols == 0) throw ConfigError("codec input extents must be positive");
  if (ratio.num == 0 || ratio.den == 0 || ratio.num > ratio.den) throw ConfigError("compression ratio must lie in (0,1]");
  if (kernel % 2 == 0 || head_kernel % 2 == 0) throw ConfigError("kernel lengths must be odd");
  if (!linear) {
    if (encoder_widths.empty() || encoder_widths.back() != 2)
      throw ConfigError("encoder trunk must end with 2 feature maps");
    if (decoder_widths.empty() || decoder_widths.back() != 2)
      throw ConfigError("decoder trunk must end with 2 feature maps");
  }
  if (latent_length() == 0) throw ConfigError("latent length is zero");
}

std::vector<Tensor*> CodecModel::parameters() {
  auto p = encoder.parameters();
  auto d = decoder.parameters();
  p.insert(p.end(), d.begin(), d.end());
  return p;
}

namespace {

void init_stack(LayerStack& stack, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (auto* c = dynamic_cast<Conv2dLayer*>(&stack[i])) c->init_glorot(rng);
    if (auto* a = dynamic_cast<AffineLayer*>(&stack[i])) a->init_glorot(rng);
  }
}

void add_trunk(LayerStack& stack, const CodecConfig& c, std::size_t cin, const std::vector<std::size_t>& widths,
               bool final_tanh) {
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    stack.emplace<Conv2dLayer>(cin, widths[i], c.kernel, c.kernel, true);
    if (last && final_tanh) {
      stack.emplace<TanhLayer>();
    } else {
      if (c.batch_norm) stack.emplace<BatchNormLayer>(widths[i]);
      stack.emplace<LeakyReluLayer>(c.leaky_slope);
    }
    cin = widths[i];
  }
}

}  // namespace

CodecModel build_codec(const CodecConfig& config, std::uint64_t seed) {
  config.validate();
  CodecModel m;
  m.config = config;
  const std::size_t n = config.input_length();
  const std::size_t latent = config.latent_length();

  if (config.linear) {
    m.encoder.emplace<ReshapeLayer>(Shape{n});
    m.encoder_head_begin = 1;
    m.encoder.emplace<AffineLayer>(n, latent, false);
    m.decoder.emplace<AffineLayer>(latent, n, false);
    m.decoder.emplace<ReshapeLayer>(Shape{2, config.rows, config.cols});
    m.decoder_head_end = 2;
  } else {
    add_trunk(m.encoder, config, 2, config.encoder_widths, false);
    m.encoder_head_begin = m.encoder.size();
    if (config.head == LatentHead::kFc) {
      m.encoder.emplace<ReshapeLayer>(Shape{n});
      m.encoder.emplace<AffineLayer>(n, latent, true);
      m.decoder.emplace<AffineLayer>(latent, n, true);
      m.decoder.emplace<ReshapeLayer>(Shape{2, config.rows, config.cols});
    } else {
      // Each of the 2*rows (channel, delay row) slices becomes a 1 x cols map.
      const std::size_t maps = 2 * config.rows;
      const std::size_t m_out = config.head_maps();
      m.encoder.emplace<ReshapeLayer>(Shape{maps, 1, config.cols});
      m.encoder.emplace<Conv2dLayer>(maps, m_out, 1, config.head_kernel, true);
      m.encoder.emplace<ReshapeLayer>(Shape{latent});
      m.decoder.emplace<ReshapeLayer>(Shape{m_out, 1, config.cols});
      m.decoder.emplace<Conv2dLayer>(m_out, maps, 1, config.head_kernel, true);
      m.decoder.emplace<ReshapeLayer>(Shape{2, config.rows, config.cols});
    }
    m.decoder_head_end = m.decoder.size();
    add_trunk(m.decoder, config, 2, config.decoder_widths, true);
  }

  std::mt19937_64 rng(seed);
  init_stack(m.encoder, rng);
  init_stack(m.decoder, rng);
  return m;
}

namespace {
void check_input(const CodecModel& m, const Tensor& x) {
  MNET_REQUIRE(x.rank() == 4 && x.dim(1) == 2 && x.dim(2) == m.config.rows && x.dim(3) == m.config.cols,
               "codec input must be [N,2," + std::to_string(m.config.rows) + "," + std::to_string(m.config.cols) +
                   "], got " + shape_str(x.shape()));
}
}  // namespace

namespace {
// Inference is per-sample, so running in chunks bounds tape memory without
// changing results.
Tensor run_chunked(LayerStack& stack, const Tensor& in) {
  constexpr std::size_t kChunk = 64;
  const std::size_t n = in.dim(0);
  Tensor out;
  std::size_t per_out = 0;
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    Tape tape(false);
    Tensor part = in.slice_rows(b, e);
    part.set_requires_grad(false);
    const Tensor& y = stack.forward(tape, part, Mode::kEval);
    if (b == 0) {
      Shape shape = y.shape();
      shape[0] = n;
      out = Tensor(shape);
      per_out = y.size() / (e - b);
    }
    std::copy(y.data().begin(), y.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b * per_out));
  }
  return out;
}
}  // namespace

Tensor encode(CodecModel& model, const Tensor& x) {
  check_input(model, x);
  return run_chunked(model.encoder, x);
}

Tensor decode(CodecModel& model, const Tensor& codeword) {
  const std::size_t latent = model.config.latent_length();
  MNET_REQUIRE(codeword.rank() == 2 && codeword.dim(1) == latent,
               "codeword must be [N," + std::to_string(latent) + "], got " + shape_str(codeword.shape()));
  return run_chunked(model.decoder, codeword);
}

Tensor reconstruct(CodecModel& model, const Tensor& x) { return decode(model, encode(model, x)); }

CostReport count_cost(CodecModel& model) {
  CostReport r;
  Shape shape{2, model.config.rows, model.config.cols};
  for (std::size_t i = 0; i < model.encoder.size(); ++i) {
    Layer& l = model.encoder[i];
    const std::uint64_t p = l.parameter_count();
    const std::uint64_t f = 2 * l.macs(shape);
    r.encoder_params += p;
    r.encoder_flops += f;
    (i >= model.encoder_head_begin ? r.head_params : r.trunk_params) += p;
    (i >= model.encoder_head_begin ? r.head_flops : r.trunk_flops) += f;
    shape = l.output_shape(shape);
  }
  for (std::size_t i = 0; i < model.decoder.size(); ++i) {
    Layer& l = model.decoder[i];
    const std::uint64_t p = l.parameter_count();
    const std::uint64_t f = 2 * l.macs(shape);
    r.decoder_params += p;
    r.decoder_flops += f;
    (i < model.decoder_head_end ? r.head_params : r.trunk_params) += p;
    (i < model.decoder_head_end ? r.head_flops : r.trunk_flops) += f;
    shape = l.output_shape(shape);
  }
  return r;
}

void write_cost_csv_header(std::ostream& os) {
  os << "label,head,cr,latent,encoder_params,decoder_params,head_params,trunk_params,total_params,"
        "encoder_flops,decoder_flops,head_flops,trunk_flops,total_flops\n";
}

void write_cost_csv_row(std::ostream& os, const std::string& label, const CodecConfig& config,
                        const CostReport& c) {
  os << label << ',' << head_name(config.head) << ',' << config.ratio.str() << ',' << config.latent_length() << ','
     << c.encoder_params << ',' << c.decoder_params << ',' << c.head_params << ',' << c.trunk_params << ','
     << c.total_params() << ',' << c.encoder_flops << ',' << c.decoder_flops << ',' << c.head_flops << ','
     << c.trunk_flops << ',' << c.total_flops() << '\n';
}

double evaluate_loss(CodecModel& model, const Tensor& inputs, const Tensor& targets) {
  MNET_REQUIRE(inputs.shape() == targets.shape(), "inputs and targets must share a shape");
  check_input(model, inputs);
  const Tensor y = reconstruct(model, inputs);
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - targets[i];
    total += d * d;
  }
  return total / static_cast<double>(inputs.dim(0));
}

std::vector<double> smoothed(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out;
  if (window == 0 || values.size() < window) return out;
  double acc = std::accumulate(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(window), 0.0);
  out.push_back(acc / static_cast<double>(window));
  for (std::size_t i = window; i < values.size(); ++i) {
    acc += values[i] - values[i - window];
    out.push_back(acc / static_cast<double>(window));
  }
  return out;
}

TrainResult train_codec(CodecModel& model, const Tensor& inputs, const Tensor& targets,
                        const TrainOptions& opt) {
  check_input(model, inputs);
  MNET_REQUIRE(inputs.shape() == targets.shape(), "inputs and targets must share a shape");
  MNET_REQUIRE(opt.batch >= 1, "batch size must be positive");
  const std::size_t k = inputs.dim(0);
  if (model.config.batch_norm && !model.config.linear)
    MNET_REQUIRE(k >= 2, "batch-norm training needs at least 2 samples");

  TrainResult result;
  result.initial_loss = evaluate_loss(model, inputs, targets);

  // Balanced batches, none smaller than the requested size unless k is.
  const std::size_t nb = std::max<std::size_t>(1, k / opt.batch);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opt.seed);
  Adam adam(model.parameters(), opt.adam);

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lo = b * k / nb;
      const std::size_t hi = (b + 1) * k / nb;
      const std::span<const std::size_t> rows(order.data() + lo, hi - lo);
      Tensor xb = gather_rows(inputs, rows);
      const Tensor tb = gather_rows(targets, rows);
      Tape tape;
      Tensor& z = model.encoder.forward(tape, xb, Mode::kTrain);
      Tensor& y = model.decoder.forward(tape, z, Mode::kTrain);
      Tensor& loss = mse_loss(tape, y, tb);
      const double l = loss.item();
      if (!std::isfinite(l)) throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch), epoch);
      adam.zero_grad();
      tape.backward(loss);
      adam.step();
      sum += l * static_cast<double>(hi - lo);
    }
    const double mean = sum / static_cast<double>(k);
    result.loss_history.push_back(mean);
    if (opt.on_epoch) opt.on_epoch(epoch, mean);
  }

  result.final_loss = evaluate_loss(model, inputs, targets);
  if (!std::isfinite(result.final_loss)) throw DivergenceError("non-finite loss after training", opt.epochs);
  const auto s = smoothed(result.loss_history, opt.smoothing_window);
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[i - 1]) {
      result.smoothed_monotone = false;
      break;
    }
  }
  return result;
}

namespace {
constexpr std::uint32_t kCodecHeaderTag = 100;
constexpr std::uint32_t kCodecHeaderVersion = 1;
}  // namespace

std::vector<CheckpointRecord> codec_to_records(CodecModel& m) {
  const auto& c = m.config;
  CheckpointRecord h;
  h.tag = kCodecHeaderTag;
  auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  h.shape = {kCodecHeaderVersion,
             u(c.rows),
             u(c.cols),
             u(c.kernel),
             static_cast<std::uint32_t>(c.head),
             c.ratio.num,
             c.ratio.den,
             u(c.head_kernel),
             c.batch_norm ? 1u : 0u,
             c.linear ? 1u : 0u,
             u(m.encoder_head_begin),
             u(m.decoder_head_end),
             u(m.encoder.size()),
             u(m.decoder.size()),
             u(c.encoder_widths.size())};
  for (auto w : c.encoder_widths) h.shape.push_back(u(w));
  h.shape.push_back(u(c.decoder_widths.size()));
  for (auto w : c.decoder_widths) h.shape.push_back(u(w));
  h.payload = {m.input_scale, m.codeword_scale, c.leaky_slope};

  std::vector<CheckpointRecord> out{h};
  for (std::size_t i = 0; i < m.encoder.size(); ++i) out.push_back(layer_to_record(m.encoder[i]));
  for (std::size_t i = 0; i < m.decoder.size(); ++i) out.push_back(layer_to_record(m.decoder[i]));
  return out;
}

CodecModel codec_from_records(const std::vector<CheckpointRecord>& records) {
  if (records.empty() || records[0].tag != kCodecHeaderTag) throw IoError("checkpoint lacks a codec header");
  const auto& s = records[0].shape;
  const auto& p = records[0].payload;
  if (s.size() < 16 || s[0] != kCodecHeaderVersion || p.size() != 3) throw IoError("malformed codec header");
  CodecModel m;
  CodecConfig& c = m.config;
  c.rows = s[1];
  c.cols = s[2];
  c.kernel = s[3];
  if (s[4] > 1) throw IoError("unknown latent head in checkpoint");
  c.head = static_cast<LatentHead>(s[4]);
  c.ratio = {s[5], s[6]};
  c.head_kernel = s[7];
  c.batch_norm = s[8] != 0;
  c.linear = s[9] != 0;
  m.encoder_head_begin = s[10];
  m.decoder_head_end = s[11];
  const std::size_t n_enc = s[12];
  const std::size_t n_dec = s[13];
  std::size_t pos = 14;
  auto read_list = [&](std::vector<std::size_t>& dst) {
    if (pos >= s.size()) throw IoError("malformed codec header");
    const std::size_t n = s[pos++];
    if (pos + n > s.size()) throw IoError("malformed codec header");
    dst.assign(s.begin() + static_cast<std::ptrdiff_t>(pos), s.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  };
  read_list(c.encoder_widths);
  read_list(c.decoder_widths);
  m.input_scale = p[0];
  m.codeword_scale = p[1];
  c.leaky_slope = p[2];
  if (records.size() != 1 + n_enc + n_dec) throw IoError("codec checkpoint layer count mismatch");
  for (std::size_t i = 0; i < n_enc; ++i) m.encoder.push(layer_from_record(records[1 + i]));
  for (std::size_t i = 0; i < n_dec; ++i) m.decoder.push(layer_from_record(records[1 + n_enc + i]));
  return m;
}

void save_codec(CodecModel& model, const std::string& path) { write_checkpoint_file(path, codec_to_records(model)); }

CodecModel load_codec(const std::string& path) { return codec_from_records(read_checkpoint_file(path)); }

}  // namespace mnet
