// Command-line front end: dataset generation, training, evaluation and sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mnet/entropy.hpp"
#include "mnet/error.hpp"
#include "mnet/experiment.hpp"
#include "mnet/oracle.hpp"

using namespace mnet;

namespace {

enum Exit { kOk = 0, kFailed = 1, kConfig = 2, kDivergence = 3, kIo = 4 };

struct Common {
  std::string preset = "slow";
  std::string dataset;
  std::string out;
  std::uint64_t seed = 1;
  std::size_t samples = 0;  // 0 = every sample after `offset`
  std::size_t offset = 0;
};

struct PipelineArgs {
  std::string cr1 = "1/4";
  std::string cr2 = "1/16";
  std::string head = "fc";
  std::string mode = "differential";
  std::size_t slots = 10;
  bool naive = false;
  bool batch_norm = false;
  std::size_t epochs_slot1 = 300;
  std::size_t epochs_scratch = 300;
  std::size_t epochs_warm = 100;
  std::size_t batch = 200;
  double learning_rate = 1e-3;
  std::string slot1;
};

struct QuantArgs {
  unsigned bits = 32;
  double mu = 255.0;
  std::string mode = "mu_law";
};

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos) {
        const std::size_t a = std::stoul(item.substr(0, dash)), b = std::stoul(item.substr(dash + 1));
        if (b < a) throw ConfigError("bad range '" + item + "'");
        for (std::size_t v = a; v <= b; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoul(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad list item '" + item + "' in '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

CsiSequence read_data(const Common& c) {
  if (c.dataset.empty()) throw ConfigError("--dataset is required");
  CsiSequence d = load_dataset(c.dataset);
  if (c.offset >= d.samples) throw ConfigError("--offset leaves no samples");
  const std::size_t end = c.samples == 0 ? d.samples : c.offset + c.samples;
  if (end > d.samples) throw ConfigError("dataset holds only " + std::to_string(d.samples) + " samples");
  return c.offset == 0 && end == d.samples ? d : d.subset(c.offset, end);
}

std::ofstream open_out(const std::string& path) {
  if (path.empty()) throw ConfigError("--out is required");
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  return os;
}

// Writes to --out when given, stdout otherwise.
template <typename F>
void emit(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
  } else {
    std::ofstream os = open_out(path);
    write(os);
    if (!os) throw IoError("write failed for " + path);
  }
}

PipelineConfig pipeline_config(const PipelineArgs& a, const CsiSequence& d) {
  PipelineConfig p;
  p.slots = a.slots;
  p.cr1 = Ratio::parse(a.cr1);
  p.cr2 = Ratio::parse(a.cr2);
  p.head = parse_head(a.head);
  if (a.mode == "differential")
    p.mode = PipelineMode::kDifferential;
  else if (a.mode == "independent")
    p.mode = PipelineMode::kIndependent;
  else
    throw ConfigError("--mode must be differential or independent");
  p.spherical = !a.naive;
  p.codec.rows = d.rows;
  p.codec.cols = d.cols;
  p.codec.batch_norm = a.batch_norm;
  return p;
}

ScheduleOptions schedule(const PipelineArgs& a, std::uint64_t seed) {
  ScheduleOptions s;
  s.epochs_slot1 = a.epochs_slot1;
  s.epochs_scratch = a.epochs_scratch;
  s.epochs_warm = a.epochs_warm;
  s.batch = a.batch;
  s.seed = seed;
  s.adam.learning_rate = a.learning_rate;
  s.on_epoch = [](std::size_t slot, std::size_t epoch, double loss) {
    if (epoch % 10 == 0) std::cerr << "slot " << slot << " epoch " << epoch << " loss " << loss << "\n";
  };
  return s;
}

QuantizerSpec quantizer(const QuantArgs& q) {
  QuantizerSpec s{q.bits, q.mu, parse_quant_mode(q.mode)};
  s.validate();
  return s;
}

void add_common(CLI::App* cmd, Common& c, bool dataset, bool range) {
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output path");
  if (dataset) cmd->add_option("--dataset", c.dataset, "Dataset file written by gen");
  if (range) {
    cmd->add_option("--offset", c.offset, "Skip this many leading samples");
    cmd->add_option("--samples", c.samples, "Use this many samples (0 = all)");
  }
}

void add_pipeline(CLI::App* cmd, PipelineArgs& a, bool residual) {
  cmd->add_option("--cr1", a.cr1, "Slot-1 compression ratio");
  cmd->add_option("--head", a.head, "Latent head: fc or cnn")->check(CLI::IsMember({"fc", "cnn"}));
  cmd->add_flag("--naive", a.naive, "Global range normalization instead of spherical");
  cmd->add_flag("--batch-norm", a.batch_norm, "Batch normalization after every trunk conv");
  cmd->add_option("--epochs-slot1", a.epochs_slot1, "Slot-1 epochs");
  cmd->add_option("--batch", a.batch, "Minibatch size");
  cmd->add_option("--lr", a.learning_rate, "Adam learning rate");
  if (residual) {
    cmd->add_option("--cr2", a.cr2, "Residual compression ratio");
    cmd->add_option("--slots", a.slots, "Slots T");
    cmd->add_option("--mode", a.mode, "differential or independent");
    cmd->add_option("--epochs-scratch", a.epochs_scratch, "Slot-2 epochs");
    cmd->add_option("--epochs-warm", a.epochs_warm, "Epochs for each warm-started slot");
    cmd->add_option("--slot1", a.slot1, "Reuse the slot-1 codec of a saved pipeline");
  }
}

void add_quant(CLI::App* cmd, QuantArgs& q) {
  cmd->add_option("--bits", q.bits, "Codeword bits (32 = unquantized)");
  cmd->add_option("--mu", q.mu, "mu-law parameter");
  cmd->add_option("--quant-mode", q.mode, "mu_law or uniform");
}

int run(int argc, char** argv) {
  CLI::App app{"MarkovNet CSI feedback toolkit"};
  app.require_subcommand(1);

  Common c;
  PipelineArgs pa;
  QuantArgs qa;

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  add_common(gen, c, false, false);
  std::size_t gen_samples = 6000, gen_slots = 10;
  double gamma = -1, spread = -1;
  std::size_t rows = 0, antennas = 0, subcarriers = 0, paths = 0;
  gen->add_option("--preset", c.preset, "slow or fast")->check(CLI::IsMember({"slow", "fast"}));
  gen->add_option("--samples", gen_samples, "Samples K");
  gen->add_option("--slots", gen_slots, "Slots T");
  gen->add_option("--gamma", gamma, "Override the preset's AR coefficient");
  gen->add_option("--power-spread-db", spread, "Override the per-UE path-loss spread");
  gen->add_option("--rows", rows, "Retained delay rows");
  gen->add_option("--antennas", antennas, "Base-station antennas");
  gen->add_option("--subcarriers", subcarriers, "Subcarriers");
  gen->add_option("--paths", paths, "Occupied delay-angle cells per UE");

  auto* t1 = app.add_subcommand("train-slot1", "Train a single-slot codec");
  add_common(t1, c, true, true);
  add_pipeline(t1, pa, false);

  auto* tp = app.add_subcommand("train-pipeline", "Train a multi-slot pipeline");
  add_common(tp, c, true, true);
  add_pipeline(tp, pa, true);

  auto* ev = app.add_subcommand("eval", "Evaluate a saved pipeline or run a manifest");
  add_common(ev, c, true, true);
  add_quant(ev, qa);
  std::string manifest, pipeline_dir;
  ev->add_option("--manifest", manifest, "Experiment manifest (JSON)");
  ev->add_option("--pipeline", pipeline_dir, "Saved pipeline directory");

  auto* qs = app.add_subcommand("quant-sweep", "Codeword quantization sweep");
  add_common(qs, c, true, true);
  std::string bits_list = "4,6,8,10", modes = "mu_law,uniform";
  double sweep_mu = 255.0;
  qs->add_option("--pipeline", pipeline_dir, "Saved pipeline directory")->required();
  qs->add_option("--bits", bits_list, "Comma list of bit widths");
  qs->add_option("--mu", sweep_mu, "mu-law parameter");
  qs->add_option("--modes", modes, "Comma list of quantizer modes");

  auto* es = app.add_subcommand("entropy-sweep", "Per-element entropy versus slot gap");
  add_common(es, c, true, true);
  unsigned entropy_bits = 14;
  std::string deltas = "1-9";
  es->add_option("--bits", entropy_bits, "Binning bits");
  es->add_option("--deltas", deltas, "Slot gaps, e.g. 1-9 or 1,2,5");

  auto* cr = app.add_subcommand("cost-report", "Parameter and FLOP counts");
  std::string cost_ratios = "4,8,16,32,64";
  bool cost_bn = false;
  cr->add_option("--out", c.out, "Output CSV");
  cr->add_option("--ratios", cost_ratios, "Denominators of the ratios to report");
  cr->add_flag("--batch-norm", cost_bn, "Count batch-norm layers");

  auto* oc = app.add_subcommand("oracle-check", "Gradient, identity-codec and PCA oracles");
  std::size_t fd_seeds = 20;
  oc->add_option("--seeds", fd_seeds, "Finite-difference seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (gen->parsed()) {
    ChannelConfig cfg = preset_config(c.preset);
    cfg.seed = c.seed;
    cfg.slots = gen_slots;
    if (gamma >= 0) cfg.gamma = gamma;
    if (spread >= 0) cfg.power_spread_db = spread;
    if (rows) cfg.rows = rows;
    if (antennas) cfg.antennas = antennas;
    if (subcarriers) cfg.subcarriers = subcarriers;
    if (paths) cfg.num_paths = paths;
    cfg.validate();
    if (c.out.empty()) throw ConfigError("--out is required");
    const CsiSequence d = generate(cfg, gen_samples);
    save_dataset(d, c.out);
    save_dataset_manifest(cfg, gen_samples, c.out + ".manifest");
    std::cout << "wrote " << d.samples << " samples x " << d.slots << " slots to " << c.out << "\n";
  } else if (t1->parsed() || tp->parsed()) {
    if (c.out.empty()) throw ConfigError("--out is required");
    const CsiSequence d = read_data(c);
    if (t1->parsed()) {
      pa.slots = 1;
      pa.mode = "independent";
    }
    const PipelineConfig cfg = pipeline_config(pa, d);
    std::optional<SlotStage> reuse;
    if (!pa.slot1.empty()) reuse = load_pipeline(pa.slot1).stages.at(0);
    const PipelineTraining t = train_pipeline(d, cfg, schedule(pa, c.seed), reuse ? &*reuse : nullptr);
    save_pipeline(t.pipeline, c.out);
    std::cout << "gamma_hat " << t.pipeline.gamma << "\n";
    for (std::size_t i = 0; i < t.slot_results.size(); ++i)
      std::cout << "codec " << i + 1 << " final loss " << t.slot_results[i].final_loss << "\n";
    std::cout << "saved to " << c.out << "\n";
  } else if (ev->parsed()) {
    if (!manifest.empty()) {
      const ExperimentManifest m = load_manifest(manifest);
      const EvalReport r = run_experiment(m, [](const std::string& s) { std::cerr << s << "\n"; });
      if (c.out.empty()) throw ConfigError("--out is required");
      write_report(r, c.out);
      std::cout << "wrote " << r.rows.size() << " rows to " << c.out << "/nmse.csv\n";
    } else {
      if (pipeline_dir.empty()) throw ConfigError("eval needs --manifest or --pipeline");
      MarkovNetPipeline p = load_pipeline(pipeline_dir);
      p.quantizer = quantizer(qa);
      const CsiSequence d = read_data(c);
      EvalReport r;
      r.name = "eval " + pipeline_dir;
      r.manifest_hash = "none";
      r.seed = c.seed;
      r.preset = d.preset;
      r.test_samples = d.samples;
      r.rows = nmse_rows(std::filesystem::path(pipeline_dir).filename().string(), p, run_pipeline(p, d), c.seed);
      emit(c.out, [&](std::ostream& os) { write_nmse_csv(os, r); });
    }
  } else if (qs->parsed()) {
    MarkovNetPipeline p = load_pipeline(pipeline_dir);
    const CsiSequence d = read_data(c);
    std::vector<unsigned> bits;
    for (std::size_t b : parse_list(bits_list)) bits.push_back(static_cast<unsigned>(b));
    std::vector<QuantMode> qm;
    std::stringstream ss(modes);
    for (std::string m; std::getline(ss, m, ',');) qm.push_back(parse_quant_mode(m));
    const auto rows = quant_sweep(p, d, bits, qm, sweep_mu);
    emit(c.out, [&](std::ostream& os) { write_quant_sweep_csv(os, rows); });
  } else if (es->parsed()) {
    const CsiSequence d = read_data(c);
    const auto rows = entropy_sweep(d, parse_list(deltas), entropy_bits);
    emit(c.out, [&](std::ostream& os) { write_entropy_csv(os, rows); });
  } else if (cr->parsed()) {
    emit(c.out, [&](std::ostream& os) {
      write_cost_csv_header(os);
      for (LatentHead h : {LatentHead::kFc, LatentHead::kCnn})
        for (std::size_t den : parse_list(cost_ratios)) {
          CodecConfig cfg;
          cfg.head = h;
          cfg.ratio = {1, static_cast<std::uint32_t>(den)};
          cfg.batch_norm = cost_bn;
          CodecModel m = build_codec(cfg, 1);
          write_cost_csv_row(os, std::string(head_name(h)) + "-1/" + std::to_string(den), cfg, count_cost(m));
        }
    });
  } else if (oc->parsed()) {
    bool ok = true;
    double worst = 0.0;
    std::string worst_op;
    for (std::size_t s = 0; s < fd_seeds; ++s)
      for (const OpCheck& o : op_gradient_suite(s))
        if (o.error > worst) {
          worst = o.error;
          worst_op = o.op;
        }
    ok &= worst < 1e-4;
    std::printf("%s finite-difference: worst relative error %.3g (%s) over %zu seeds\n", worst < 1e-4 ? "PASS" : "FAIL",
                worst, worst_op.c_str(), fd_seeds);
    ChannelConfig cfg = preset_config("slow");
    cfg.slots = 5;
    const double id = identity_pipeline_check(generate(cfg, 20));
    ok &= id <= 1e-20;
    std::printf("%s identity codec: worst slot NMSE %.3g\n", id <= 1e-20 ? "PASS" : "FAIL", id);
    const PcaOracleResult pca = pca_oracle_check();
    ok &= pca.relative_gap() <= 0.10;
    std::printf("%s pca: oracle %.6g trained %.6g gap %.2f%%\n", pca.relative_gap() <= 0.10 ? "PASS" : "FAIL",
                pca.pca_error, pca.trained_error, 100.0 * pca.relative_gap());
    return ok ? kOk : kFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
}
