#include "mnet/markovnet.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mnet/error.hpp"

namespace mnet {

GammaEstimate estimate_gamma(const CsiSequence& data) {
  data.check();
  MNET_REQUIRE(data.slots >= 2, "gamma estimation needs T >= 2");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < data.samples; ++k) {
    for (std::size_t t = 1; t < data.slots; ++t) {
      auto cur = data.matrix(k, t);
      auto prev = data.matrix(k, t - 1);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        // Re tr(H_t H_{t-1}^H) = sum Re(h_t conj(h_{t-1}))
        num += (cur[i] * std::conj(prev[i])).real();
        den += std::norm(prev[i]);
      }
    }
  }
  MNET_REQUIRE(den > 0.0, "gamma estimate has a zero denominator");
  return {num / den, data.samples * (data.slots - 1)};
}

Tensor IdentitySlotCodec::encode(const Tensor& x) {
  MNET_REQUIRE(x.rank() == 4 && x.dim(1) == 2 && x.dim(2) == rows_ && x.dim(3) == cols_,
               "identity codec input has the wrong shape");
  return x.reshaped({x.dim(0), latent_length()});
}

Tensor IdentitySlotCodec::decode(const Tensor& z) {
  MNET_REQUIRE(z.rank() == 2 && z.dim(1) == latent_length(), "identity codec codeword has the wrong length");
  return z.reshaped({z.dim(0), 2, rows_, cols_});
}

CodecConfig PipelineConfig::slot_codec_config(std::size_t slot) const {
  MNET_REQUIRE(slot >= 1, "slots are 1-based");
  CodecConfig c = codec;
  c.head = head;
  c.ratio = (slot == 1 || mode == PipelineMode::kIndependent) ? cr1 : cr2;
  return c;
}

QuantizerSpec MarkovNetPipeline::quantizer_for(std::size_t slot) const {
  QuantizerSpec q = quantizer;
  if (slot == 1 && !q.passthrough() && q.bits < slot1_min_bits) q.bits = slot1_min_bits;
  return q;
}

MarkovNetPipeline identity_pipeline(const PipelineConfig& config, double gamma) {
  MarkovNetPipeline p;
  p.config = config;
  p.gamma = config.mode == PipelineMode::kIndependent ? 0.0 : gamma;
  auto codec = std::make_shared<IdentitySlotCodec>(config.codec.rows, config.codec.cols);
  for (std::size_t t = 0; t < config.slots; ++t) p.stages.push_back({codec, 1.0, 1.0});
  return p;
}

namespace {

SlotStage& stage_at(MarkovNetPipeline& p, std::size_t slot) {
  MNET_REQUIRE(slot >= 1 && slot <= p.stages.size(),
               "slot " + std::to_string(slot) + " outside 1.." + std::to_string(p.stages.size()));
  return p.stages[slot - 1];
}

SlotPayload encode_target(MarkovNetPipeline& p, std::size_t slot, const Tensor& target) {
  SlotStage& st = stage_at(p, slot);
  SlotPayload out;
  Tensor dirs;
  if (p.config.spherical) {
    const auto norms = sample_norms(target);
    std::vector<double> inv(norms.size());
    out.magnitudes.resize(norms.size());
    if (!p.config.exact_magnitude) out.magnitude_codes.resize(norms.size());
    for (std::size_t k = 0; k < norms.size(); ++k) {
      // A zero residual has no direction; send zeros and the floor magnitude.
      inv[k] = norms[k] > 0.0 ? 1.0 / norms[k] : 0.0;
      if (p.config.exact_magnitude) {
        out.magnitudes[k] = norms[k];
      } else {
        bool sat = false;
        out.magnitude_codes[k] = p.config.magnitude.encode(norms[k], &sat);
        out.magnitudes[k] = p.config.magnitude.decode(out.magnitude_codes[k]);
        out.magnitude_saturations += sat;
      }
    }
    dirs = scale_samples(target, inv);
  } else {
    dirs = target;
  }
  const Tensor normalized = RangeNormalizer{st.input_scale}.normalize(dirs, &out.range_clips);
  out.codeword = st.codec->encode(normalized);
  const QuantizerSpec q = p.quantizer_for(slot);
  if (q.passthrough()) {
    out.bits_per_sample = static_cast<std::uint64_t>(out.codeword.dim(1)) * QuantizerSpec::kPassthroughBits;
  } else {
    auto qc = quantize_codeword(out.codeword, q, st.codeword_scale);
    out.codeword = std::move(qc.values);
    out.bits_per_sample = qc.bits_per_sample;
    out.codeword_clips = qc.clipped;
  }
  if (p.config.spherical) out.bits_per_sample += p.config.exact_magnitude ? 64 : p.config.magnitude.bits;
  return out;
}

Tensor decode_target(MarkovNetPipeline& p, std::size_t slot, const SlotPayload& payload) {
  SlotStage& st = stage_at(p, slot);
  Tensor d = RangeNormalizer{st.input_scale}.denormalize(st.codec->decode(payload.codeword));
  if (p.config.spherical) {
    MNET_REQUIRE(payload.magnitudes.size() == d.dim(0), "payload lacks magnitudes");
    d = scale_samples(d, payload.magnitudes);
  }
  return d;
}

Tensor add_scaled(const Tensor& a, double c, const Tensor& b) {
  MNET_REQUIRE(a.shape() == b.shape(), "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * b[i];
  return out;
}

}  // namespace

SlotPayload encode_slot1(MarkovNetPipeline& p, const Tensor& h) { return encode_target(p, 1, h); }

Tensor decode_slot1(MarkovNetPipeline& p, const SlotPayload& payload) { return decode_target(p, 1, payload); }

SlotPayload encode_slot(MarkovNetPipeline& p, std::size_t slot, const Tensor& h, const Tensor& prev_hat) {
  MNET_REQUIRE(slot >= 2, "encode_slot handles slots >= 2");
  return encode_target(p, slot, add_scaled(h, -p.gamma, prev_hat));
}

Tensor decode_slot(MarkovNetPipeline& p, std::size_t slot, const SlotPayload& payload, const Tensor& prev_hat) {
  MNET_REQUIRE(slot >= 2, "decode_slot handles slots >= 2");
  return add_scaled(decode_target(p, slot, payload), p.gamma, prev_hat);
}

SlotPayload UeEncoder::step(const Tensor& h) {
  ++slot_;
  SlotPayload payload;
  if (slot_ == 1) {
    payload = encode_slot1(p_, h);
    prev_ = decode_slot1(p_, payload);
  } else {
    payload = encode_slot(p_, slot_, h, prev_);
    prev_ = decode_slot(p_, slot_, payload, prev_);
  }
  return payload;
}

Tensor GnbDecoder::step(const SlotPayload& payload) {
  ++slot_;
  prev_ = slot_ == 1 ? decode_slot1(p_, payload) : decode_slot(p_, slot_, payload, prev_);
  return prev_;
}

PipelineRun run_pipeline(MarkovNetPipeline& p, const CsiSequence& data, std::size_t chunk) {
  data.check();
  MNET_REQUIRE(data.slots >= p.slots(), "dataset has fewer slots than the pipeline");
  MNET_REQUIRE(chunk >= 1, "chunk must be positive");
  const std::size_t k = data.samples, plane = 2 * data.matrix_size();
  PipelineRun run;
  for (std::size_t t = 0; t < p.slots(); ++t) {
    run.truth.push_back(data.slot_tensor(t));
    run.reconstructions.emplace_back(run.truth.back().shape());
  }
  run.bits_per_sample.assign(p.slots(), 0);
  run.codeword_clips.assign(p.slots(), 0);
  for (std::size_t b = 0; b < k; b += chunk) {
    const std::size_t e = std::min(k, b + chunk);
    UeEncoder ue(p);
    GnbDecoder gnb(p);
    for (std::size_t t = 0; t < p.slots(); ++t) {
      const SlotPayload payload = ue.step(run.truth[t].slice_rows(b, e));
      const Tensor recon = gnb.step(payload);
      const auto a = ue.replica().data(), c = recon.data();
      if (a.size() != c.size() || std::memcmp(a.data(), c.data(), a.size_bytes()) != 0) run.replicas_agree = false;
      std::copy(c.begin(), c.end(), run.reconstructions[t].data().begin() + static_cast<std::ptrdiff_t>(b * plane));
      run.bits_per_sample[t] = payload.bits_per_sample;
      run.codeword_clips[t] += payload.codeword_clips;
    }
  }
  return run;
}

namespace {

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

/// Direction tensor the codec at `slot` trains on, before range scaling.
Tensor codec_target(const MarkovNetPipeline& p, const Tensor& target) {
  if (!p.config.spherical) return target;
  const auto norms = sample_norms(target);
  std::vector<double> inv(norms.size());
  for (std::size_t k = 0; k < norms.size(); ++k) inv[k] = norms[k] > 0.0 ? 1.0 / norms[k] : 0.0;
  return scale_samples(target, inv);
}

TrainResult fit_stage(MarkovNetPipeline& p, std::size_t slot, CodecModel model, const Tensor& target,
                      double input_scale, std::size_t epochs, const ScheduleOptions& s) {
  const Tensor x = RangeNormalizer{input_scale}.normalize(codec_target(p, target));
  TrainOptions opt;
  opt.epochs = epochs;
  opt.batch = s.batch;
  opt.adam = s.adam;
  opt.seed = s.seed * 7919 + slot;
  opt.smoothing_window = s.smoothing_window;
  if (s.on_epoch) opt.on_epoch = [&](std::size_t e, double l) { s.on_epoch(slot, e, l); };
  TrainResult r = train_codec(model, x, x, opt);
  model.input_scale = input_scale;
  model.codeword_scale = max_abs(encode(model, x));
  SlotStage& st = p.stages[slot - 1];
  st.input_scale = input_scale;
  st.codeword_scale = model.codeword_scale;
  st.codec = std::make_shared<LearnedSlotCodec>(std::move(model));
  return r;
}

}  // namespace

PipelineTraining train_pipeline(const CsiSequence& train, const PipelineConfig& config,
                                const ScheduleOptions& s, const SlotStage* slot1) {
  train.check();
  MNET_REQUIRE(config.slots >= 1 && config.slots <= train.slots, "pipeline slots must lie in [1, dataset T]");
  MNET_REQUIRE(config.codec.rows == train.rows && config.codec.cols == train.cols,
               "codec extents do not match the dataset");
  PipelineTraining out;
  MarkovNetPipeline& p = out.pipeline;
  p.config = config;
  p.stages.resize(config.slots);
  if (config.mode == PipelineMode::kDifferential && train.slots >= 2) {
    out.gamma = estimate_gamma(train);
    p.gamma = out.gamma.gamma_hat;
  }
  if (config.mode == PipelineMode::kIndependent) p.gamma = 0.0;

  // Slot 1.
  const Tensor h1 = train.slot_tensor(0);
  if (slot1) {
    MNET_REQUIRE(slot1->codec && slot1->codec->latent_length() == config.slot_codec_config(1).latent_length(),
                 "reused slot-1 codec does not match the slot-1 configuration");
    p.stages[0] = *slot1;
  } else {
    const double scale1 = RangeNormalizer::fit(codec_target(p, h1)).scale;
    out.slot_results.push_back(
        fit_stage(p, 1, build_codec(config.slot_codec_config(1), s.seed), h1, scale1, s.epochs_slot1, s));
  }

  if (config.mode == PipelineMode::kIndependent) {
    for (std::size_t t = 1; t < config.slots; ++t) p.stages[t] = p.stages[0];
    return out;
  }

  Tensor prev = decode_slot1(p, encode_slot1(p, h1));
  double residual_scale = 0.0;
  for (std::size_t slot = 2; slot <= config.slots; ++slot) {
    const Tensor h = train.slot_tensor(slot - 1);
    const Tensor residual = add_scaled(h, -p.gamma, prev);
    CodecModel model;
    std::size_t epochs;
    if (slot == 2) {
      residual_scale = RangeNormalizer::fit(codec_target(p, residual)).scale;
      model = build_codec(config.slot_codec_config(2), s.seed + 1);
      epochs = s.epochs_scratch;
    } else {
      model = dynamic_cast<LearnedSlotCodec&>(*p.stages[slot - 2].codec).model;
      epochs = s.epochs_warm;
    }
    out.slot_results.push_back(fit_stage(p, slot, std::move(model), residual, residual_scale, epochs, s));
    prev = decode_slot(p, slot, encode_slot(p, slot, h, prev), prev);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const char* mode_name(PipelineMode m) { return m == PipelineMode::kIndependent ? "independent" : "differential"; }

}  // namespace

void save_pipeline(const MarkovNetPipeline& p, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::ofstream os(dir + "/pipeline.manifest");
  if (!os) throw IoError("cannot write " + dir + "/pipeline.manifest");
  const auto& c = p.config;
  os << "format=markovnet-pipeline\n"
     << "version=1\n"
     << "slots=" << p.slots() << "\n"
     << "mode=" << mode_name(c.mode) << "\n"
     << "head=" << head_name(c.head) << "\n"
     << "cr1=" << c.cr1.str() << "\n"
     << "cr2=" << c.cr2.str() << "\n"
     << "spherical=" << (c.spherical ? 1 : 0) << "\n"
     << "exact_magnitude=" << (c.exact_magnitude ? 1 : 0) << "\n"
     << "magnitude_bits=" << c.magnitude.bits << "\n"
     << "magnitude_min_db=" << fmt(c.magnitude.min_db) << "\n"
     << "magnitude_max_db=" << fmt(c.magnitude.max_db) << "\n"
     << "gamma=" << fmt(p.gamma) << "\n"
     << "quantizer_bits=" << p.quantizer.bits << "\n"
     << "quantizer_mu=" << fmt(p.quantizer.mu) << "\n"
     << "quantizer_mode=" << quant_mode_name(p.quantizer.mode) << "\n"
     << "slot1_min_bits=" << p.slot1_min_bits << "\n";
  std::map<const SlotCodec*, std::string> written;
  for (std::size_t t = 0; t < p.slots(); ++t) {
    const SlotStage& st = p.stages[t];
    auto* learned = dynamic_cast<LearnedSlotCodec*>(st.codec.get());
    if (!learned) throw ConfigError("only learned codecs can be saved");
    auto it = written.find(st.codec.get());
    if (it == written.end()) {
      const std::string name = "slot" + std::to_string(t + 1) + ".ckpt";
      save_codec(learned->model, dir + "/" + name);
      it = written.emplace(st.codec.get(), name).first;
    }
    const std::string key = "slot." + std::to_string(t + 1) + ".";
    os << key << "checkpoint=" << it->second << "\n"
       << key << "input_scale=" << fmt(st.input_scale) << "\n"
       << key << "codeword_scale=" << fmt(st.codeword_scale) << "\n";
  }
  if (!os) throw IoError("failed writing pipeline manifest");
}

namespace {

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed line in " + path + ": " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError("pipeline manifest lacks '" + key + "'");
  return it->second;
}

}  // namespace

MarkovNetPipeline load_pipeline(const std::string& dir) {
  const auto kv = read_key_values(dir + "/pipeline.manifest");
  if (need(kv, "format") != "markovnet-pipeline" || need(kv, "version") != "1")
    throw IoError("unsupported pipeline manifest in " + dir);
  MarkovNetPipeline p;
  auto& c = p.config;
  try {
    c.slots = std::stoul(need(kv, "slots"));
    c.mode = need(kv, "mode") == "independent" ? PipelineMode::kIndependent : PipelineMode::kDifferential;
    c.head = parse_head(need(kv, "head"));
    c.cr1 = Ratio::parse(need(kv, "cr1"));
    c.cr2 = Ratio::parse(need(kv, "cr2"));
    c.spherical = need(kv, "spherical") == "1";
    c.exact_magnitude = need(kv, "exact_magnitude") == "1";
    c.magnitude.bits = static_cast<unsigned>(std::stoul(need(kv, "magnitude_bits")));
    c.magnitude.min_db = std::stod(need(kv, "magnitude_min_db"));
    c.magnitude.max_db = std::stod(need(kv, "magnitude_max_db"));
    p.gamma = std::stod(need(kv, "gamma"));
    p.quantizer.bits = static_cast<unsigned>(std::stoul(need(kv, "quantizer_bits")));
    p.quantizer.mu = std::stod(need(kv, "quantizer_mu"));
    p.quantizer.mode = parse_quant_mode(need(kv, "quantizer_mode"));
    p.slot1_min_bits = static_cast<unsigned>(std::stoul(need(kv, "slot1_min_bits")));
  } catch (const std::logic_error&) {
    throw IoError("unparsable value in pipeline manifest " + dir);
  }
  std::map<std::string, std::shared_ptr<SlotCodec>> loaded;
  for (std::size_t t = 1; t <= c.slots; ++t) {
    const std::string key = "slot." + std::to_string(t) + ".";
    const std::string& file = need(kv, key + "checkpoint");
    auto& codec = loaded[file];
    if (!codec) {
      CodecModel m = load_codec(dir + "/" + file);
      if (t == 1) c.codec = m.config;
      codec = std::make_shared<LearnedSlotCodec>(std::move(m));
    }
    SlotStage st;
    st.codec = codec;
    try {
      st.input_scale = std::stod(need(kv, key + "input_scale"));
      st.codeword_scale = std::stod(need(kv, key + "codeword_scale"));
    } catch (const std::logic_error&) {
      throw IoError("unparsable scale in pipeline manifest " + dir);
    }
    p.stages.push_back(st);
  }
  return p;
}

}  // namespace mnet
