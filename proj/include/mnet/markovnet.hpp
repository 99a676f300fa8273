#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mnet/channel.hpp"
#include "mnet/codec.hpp"
#include "mnet/quantizer.hpp"
#include "mnet/sphere.hpp"
#include "mnet/transform.hpp"

namespace mnet {

struct GammaEstimate {
  double gamma_hat = 0.0;
  std::size_t pairs = 0;  // (sample, adjacent slot) pairs averaged
};

/// Re sum tr(H_t H_{t-1}^H) / sum ||H_{t-1}||_F^2 over every sample and
/// adjacent slot pair.
GammaEstimate estimate_gamma(const CsiSequence& data);

/// What the pipeline needs from a per-slot codec.
class SlotCodec {
 public:
  virtual ~SlotCodec() = default;
  /// [N,2,R,C] range-normalized input -> [N,L].
  virtual Tensor encode(const Tensor& x) = 0;
  virtual Tensor decode(const Tensor& codeword) = 0;
  virtual std::size_t latent_length() const = 0;
};

class LearnedSlotCodec final : public SlotCodec {
 public:
  explicit LearnedSlotCodec(CodecModel m) : model(std::move(m)) {}
  Tensor encode(const Tensor& x) override { return mnet::encode(model, x); }
  Tensor decode(const Tensor& z) override { return mnet::decode(model, z); }
  std::size_t latent_length() const override { return model.config.latent_length(); }

  CodecModel model;
};

/// Lossless stand-in: the codeword is the flattened input.
class IdentitySlotCodec final : public SlotCodec {
 public:
  IdentitySlotCodec(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}
  Tensor encode(const Tensor& x) override;
  Tensor decode(const Tensor& z) override;
  std::size_t latent_length() const override { return 2 * rows_ * cols_; }

 private:
  std::size_t rows_, cols_;
};

enum class PipelineMode {
  kDifferential,  // slot t codes H_t - gamma * H^_{t-1}
  kIndependent,   // every slot coded on its own by the slot-1 codec
};

struct PipelineConfig {
  std::size_t slots = 10;
  Ratio cr1{1, 4};
  Ratio cr2{1, 16};
  LatentHead head = LatentHead::kFc;
  bool spherical = true;
  PipelineMode mode = PipelineMode::kDifferential;
  MagnitudeQuantizer magnitude;
  /// Feed magnitudes back as raw doubles instead of quantized codes.
  bool exact_magnitude = false;
  /// Trunk settings shared by every slot; ratio and head are overridden.
  CodecConfig codec;

  CodecConfig slot_codec_config(std::size_t slot) const;
};

struct SlotStage {
  std::shared_ptr<SlotCodec> codec;
  double input_scale = 1.0;     // range scale applied before encoding
  double codeword_scale = 0.0;  // max |codeword| over training data
};

struct MarkovNetPipeline {
  PipelineConfig config;
  double gamma = 0.0;
  std::vector<SlotStage> stages;  // stages[0] is slot 1
  /// Inference-time codeword quantizer; passthrough by default.
  QuantizerSpec quantizer;
  /// Slot 1 is never quantized more coarsely than this.
  unsigned slot1_min_bits = 8;

  std::size_t slots() const { return stages.size(); }
  /// Quantizer actually applied at 1-based slot t.
  QuantizerSpec quantizer_for(std::size_t slot) const;
};

/// Pipeline of lossless codecs, for integration checks.
MarkovNetPipeline identity_pipeline(const PipelineConfig& config, double gamma);

struct SlotPayload {
  Tensor codeword;
  std::vector<std::uint32_t> magnitude_codes;  // empty with spherical off or exact magnitudes
  std::vector<double> magnitudes;              // values the receiver applies
  std::uint64_t bits_per_sample = 0;
  std::size_t codeword_clips = 0;
  std::size_t magnitude_saturations = 0;
  ClipCounter range_clips;
};

// Slots are 1-based. `h` and `prev_hat` are [N,2,R,C] in channel units.
SlotPayload encode_slot1(MarkovNetPipeline& p, const Tensor& h);
Tensor decode_slot1(MarkovNetPipeline& p, const SlotPayload& payload);
SlotPayload encode_slot(MarkovNetPipeline& p, std::size_t slot, const Tensor& h, const Tensor& prev_hat);
Tensor decode_slot(MarkovNetPipeline& p, std::size_t slot, const SlotPayload& payload, const Tensor& prev_hat);

/// UE side: codes each slot and keeps a decoder replica for H^_{t-1}.
class UeEncoder {
 public:
  explicit UeEncoder(MarkovNetPipeline& p) : p_(p) {}
  SlotPayload step(const Tensor& h);
  const Tensor& replica() const { return prev_; }
  std::size_t slot() const { return slot_; }

 private:
  MarkovNetPipeline& p_;
  Tensor prev_;
  std::size_t slot_ = 0;
};

/// gNB side: turns payloads back into CSI.
class GnbDecoder {
 public:
  explicit GnbDecoder(MarkovNetPipeline& p) : p_(p) {}
  Tensor step(const SlotPayload& payload);
  std::size_t slot() const { return slot_; }

 private:
  MarkovNetPipeline& p_;
  Tensor prev_;
  std::size_t slot_ = 0;
};

struct PipelineRun {
  std::vector<Tensor> truth;            // per slot, [K,2,R,C]
  std::vector<Tensor> reconstructions;  // per slot
  std::vector<std::uint64_t> bits_per_sample;
  std::vector<std::size_t> codeword_clips;
  bool replicas_agree = true;           // UE replica == gNB output at every slot
};

/// Runs the first pipeline.slots() slots of every sample in `data`, in
/// sample chunks.
PipelineRun run_pipeline(MarkovNetPipeline& p, const CsiSequence& data, std::size_t chunk = 250);

struct ScheduleOptions {
  std::size_t epochs_slot1 = 1000;
  std::size_t epochs_scratch = 1000;
  std::size_t epochs_warm = 150;
  std::size_t batch = 200;
  std::uint64_t seed = 1;
  AdamOptions adam;
  std::size_t smoothing_window = 50;
  /// (1-based slot, epoch, mean loss)
  std::function<void(std::size_t, std::size_t, double)> on_epoch;
};

struct PipelineTraining {
  MarkovNetPipeline pipeline;
  GammaEstimate gamma;
  std::vector<TrainResult> slot_results;  // one per trained codec
};

/// Trains slot 1, then each later slot on residuals against the already
/// trained prefix's reconstructions. Slot 2 starts from scratch, slots >= 3
/// start from a copy of the previous slot's codec. A non-null `slot1` is used
/// as the slot-1 stage instead of training one; it must come from the same
/// training data and slot-1 settings, and slot_results then starts at slot 2.
PipelineTraining train_pipeline(const CsiSequence& train, const PipelineConfig& config,
                                const ScheduleOptions& schedule, const SlotStage* slot1 = nullptr);

/// Writes `dir`/pipeline.manifest plus one checkpoint per distinct codec.
void save_pipeline(const MarkovNetPipeline& p, const std::string& dir);
MarkovNetPipeline load_pipeline(const std::string& dir);

}  // namespace mnet
