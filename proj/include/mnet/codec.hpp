#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mnet/adam.hpp"
#include "mnet/checkpoint.hpp"
#include "mnet/layers.hpp"

namespace mnet {

/// Compression ratio as an exact fraction, e.g. 1/16.
struct Ratio {
  std::uint32_t num = 1;
  std::uint32_t den = 4;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  /// Accepts "1/16", "16" (read as 1/16) or "0.0625".
  static Ratio parse(const std::string& text);
  bool operator==(const Ratio&) const = default;
};

enum class LatentHead : std::uint32_t { kFc = 0, kCnn = 1 };

const char* head_name(LatentHead head);
LatentHead parse_head(const std::string& text);

struct CodecConfig {
  std::size_t rows = 32;  // retained delay rows
  std::size_t cols = 32;  // antennas
  std::vector<std::size_t> encoder_widths{16, 8, 4, 2};
  std::vector<std::size_t> decoder_widths{16, 8, 4, 2};
  std::size_t kernel = 7;
  LatentHead head = LatentHead::kFc;
  Ratio ratio{1, 4};
  std::size_t head_kernel = 7;
  bool batch_norm = false;
  double leaky_slope = 0.3;
  /// Drops the conv trunk, activations and biases: a plain linear autoencoder.
  bool linear = false;

  std::size_t input_length() const { return 2 * rows * cols; }
  /// Codeword length; throws ConfigError when the ratio does not divide evenly.
  std::size_t latent_length() const;
  /// Output maps of the CNN compression head.
  std::size_t head_maps() const;
  void validate() const;
};

/// Encoder/decoder pair plus the constants both ends share.
struct CodecModel {
  CodecConfig config;
  LayerStack encoder;
  LayerStack decoder;
  /// Encoder layers at index >= this belong to the compression head.
  std::size_t encoder_head_begin = 0;
  /// Decoder layers at index < this belong to the decompression head.
  std::size_t decoder_head_end = 0;
  /// Range scale the inputs were divided by before encoding.
  double input_scale = 1.0;
  /// Max |codeword| over the training set; 0 when not yet measured.
  double codeword_scale = 0.0;

  std::vector<Tensor*> parameters();
};

CodecModel build_codec(const CodecConfig& config, std::uint64_t seed);

/// Inference-mode encoder, x [N,2,rows,cols] -> [N,L].
Tensor encode(CodecModel& model, const Tensor& x);
/// Inference-mode decoder, [N,L] -> [N,2,rows,cols].
Tensor decode(CodecModel& model, const Tensor& codeword);
Tensor reconstruct(CodecModel& model, const Tensor& x);

struct CostReport {
  std::uint64_t encoder_params = 0;
  std::uint64_t decoder_params = 0;
  std::uint64_t head_params = 0;   // both sides of the latent head
  std::uint64_t trunk_params = 0;  // everything else, batch-norm affine included
  std::uint64_t encoder_flops = 0;
  std::uint64_t decoder_flops = 0;
  std::uint64_t head_flops = 0;
  std::uint64_t trunk_flops = 0;

  std::uint64_t total_params() const { return encoder_params + decoder_params; }
  std::uint64_t total_flops() const { return encoder_flops + decoder_flops; }
};

/// FLOPs are 2 per multiply-accumulate; biases, activations and
/// normalization are not counted.
CostReport count_cost(CodecModel& model);

void write_cost_csv_header(std::ostream& os);
void write_cost_csv_row(std::ostream& os, const std::string& label, const CodecConfig& config,
                        const CostReport& cost);

struct TrainOptions {
  std::size_t epochs = 1000;
  std::size_t batch = 200;
  AdamOptions adam;
  std::uint64_t seed = 1;
  std::size_t smoothing_window = 50;
  /// Called after every epoch with the epoch index and mean training loss.
  std::function<void(std::size_t, double)> on_epoch;
};

struct TrainResult {
  std::vector<double> loss_history;  // mean minibatch loss per epoch
  double initial_loss = 0.0;         // inference-mode loss before the first step
  double final_loss = 0.0;           // inference-mode loss after the last step
  /// Whether the moving average of loss_history never rises.
  bool smoothed_monotone = true;
};

/// Minibatch Adam on the MSE between reconstruct(inputs) and targets.
/// Throws DivergenceError on a non-finite loss.
TrainResult train_codec(CodecModel& model, const Tensor& inputs, const Tensor& targets,
                        const TrainOptions& options);

/// Inference-mode MSE over a dataset.
double evaluate_loss(CodecModel& model, const Tensor& inputs, const Tensor& targets);

/// Moving average with the given window; monotone check helper.
std::vector<double> smoothed(const std::vector<double>& values, std::size_t window);

std::vector<CheckpointRecord> codec_to_records(CodecModel& model);
CodecModel codec_from_records(const std::vector<CheckpointRecord>& records);
void save_codec(CodecModel& model, const std::string& path);
CodecModel load_codec(const std::string& path);

}  // namespace mnet
