#include "mnet/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mnet/error.hpp"

#ifndef MNET_VERSION
#define MNET_VERSION "unknown"
#endif

namespace mnet {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentManifest::hash() const {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(canonical);
  return os.str();
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

Ratio read_ratio(const json& v) {
  if (v.is_string()) return Ratio::parse(v.get<std::string>());
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return Ratio::parse(os.str());
  }
  throw ConfigError("compression ratio must be a string like \"1/16\" or a number");
}

PipelineMode read_mode(const std::string& s) {
  if (s == "differential") return PipelineMode::kDifferential;
  if (s == "independent") return PipelineMode::kIndependent;
  throw ConfigError("unknown pipeline mode '" + s + "' (expected differential or independent)");
}

const char* mode_str(PipelineMode m) { return m == PipelineMode::kIndependent ? "independent" : "differential"; }

PipelineSpec read_pipeline(const json& j, const PipelineSpec& base) {
  PipelineSpec p = base;
  if (j.contains("cr1")) p.config.cr1 = read_ratio(j.at("cr1"));
  if (j.contains("cr2")) p.config.cr2 = read_ratio(j.at("cr2"));
  std::string text;
  if (j.contains("head")) {
    read(j, "head", text);
    p.config.head = parse_head(text);
  }
  if (j.contains("mode")) {
    read(j, "mode", text);
    p.config.mode = read_mode(text);
  }
  read(j, "spherical", p.config.spherical);
  read(j, "slots", p.config.slots);
  read(j, "batch_norm", p.config.codec.batch_norm);
  read(j, "checkpoint", p.checkpoint);
  read(j, "label", p.label);
  if (p.label.empty()) {
    p.label = std::string(mode_str(p.config.mode)) + "-" + head_name(p.config.head) + "-" + p.config.cr1.str() +
              "-" + p.config.cr2.str();
    if (!p.config.spherical) p.label += "-naive";
  }
  return p;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string slot1_key(const PipelineConfig& c) {
  const CodecConfig s = c.slot_codec_config(1);
  std::ostringstream os;
  os << head_name(s.head) << '|' << s.ratio.str() << '|' << s.batch_norm << '|' << s.linear << '|' << c.spherical
     << '|' << c.exact_magnitude << '|' << c.magnitude.bits << '|' << fmt(c.magnitude.min_db) << '|'
     << fmt(c.magnitude.max_db);
  return os.str();
}

}  // namespace

ExperimentManifest parse_manifest(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
  }
  check_keys(j, "manifest",
             {"name", "seed", "dataset", "pipelines", "schedule", "quantizer", "cr1", "cr2", "head", "mode",
              "spherical", "slots", "batch_norm"});
  ExperimentManifest m;
  m.canonical = j.dump();
  read(j, "name", m.name);
  read(j, "seed", m.seed);

  DatasetSpec& d = m.dataset;
  d.channel = preset_config("slow");
  if (j.contains("dataset")) {
    const json& dj = j.at("dataset");
    check_keys(dj, "dataset",
               {"path", "preset", "train", "test", "slots", "gamma", "num_paths", "path_decay", "angle_spread",
                "power_spread_db", "antennas", "subcarriers", "rows"});
    std::string preset = "slow";
    read(dj, "preset", preset);
    d.channel = preset_config(preset);
    read(dj, "path", d.path);
    read(dj, "train", d.train);
    read(dj, "test", d.test);
    read(dj, "slots", d.channel.slots);
    read(dj, "gamma", d.channel.gamma);
    read(dj, "num_paths", d.channel.num_paths);
    read(dj, "path_decay", d.channel.path_decay);
    read(dj, "angle_spread", d.channel.angle_spread);
    read(dj, "power_spread_db", d.channel.power_spread_db);
    read(dj, "antennas", d.channel.antennas);
    read(dj, "subcarriers", d.channel.subcarriers);
    read(dj, "rows", d.channel.rows);
  }
  d.channel.seed = m.seed;
  if (d.path.empty()) d.channel.validate();
  if (d.train == 0 || d.test == 0) throw ConfigError("train and test sizes must be positive");

  if (j.contains("schedule")) {
    const json& sj = j.at("schedule");
    check_keys(sj, "schedule", {"epochs_slot1", "epochs_scratch", "epochs_warm", "batch", "learning_rate"});
    read(sj, "epochs_slot1", m.schedule.epochs_slot1);
    read(sj, "epochs_scratch", m.schedule.epochs_scratch);
    read(sj, "epochs_warm", m.schedule.epochs_warm);
    read(sj, "batch", m.schedule.batch);
    read(sj, "learning_rate", m.schedule.adam.learning_rate);
  }
  m.schedule.seed = m.seed;
  if (m.schedule.batch == 0) throw ConfigError("batch must be positive");

  if (j.contains("quantizer")) {
    const json& qj = j.at("quantizer");
    check_keys(qj, "quantizer", {"bits", "mu", "mode"});
    read(qj, "bits", m.quantizer.bits);
    read(qj, "mu", m.quantizer.mu);
    std::string mode = quant_mode_name(m.quantizer.mode);
    read(qj, "mode", mode);
    m.quantizer.mode = parse_quant_mode(mode);
  }
  m.quantizer.validate();

  PipelineSpec base;
  base.config.slots = d.channel.slots;
  base.config.codec.rows = d.channel.rows;
  base.config.codec.cols = d.channel.antennas;
  json shared = json::object();
  for (const char* k : {"cr1", "head", "mode", "spherical", "slots", "batch_norm"})
    if (j.contains(k)) shared[k] = j.at(k);
  base = read_pipeline(shared, base);
  base.label.clear();

  if (j.contains("pipelines")) {
    if (j.contains("cr2")) throw ConfigError("give either top-level cr2 or a pipelines list, not both");
    const json& pj = j.at("pipelines");
    if (!pj.is_array() || pj.empty()) throw ConfigError("pipelines must be a non-empty array");
    for (std::size_t i = 0; i < pj.size(); ++i) {
      check_keys(pj[i], "pipelines[" + std::to_string(i) + "]",
                 {"label", "cr1", "cr2", "head", "mode", "spherical", "slots", "batch_norm", "checkpoint"});
      m.pipelines.push_back(read_pipeline(pj[i], base));
    }
  } else {
    json cr2 = j.contains("cr2") ? j.at("cr2") : json::array({"1/16"});
    if (!cr2.is_array()) cr2 = json::array({cr2});
    for (std::size_t i = 0; i < cr2.size(); ++i) m.pipelines.push_back(read_pipeline({{"cr2", cr2[i]}}, base));
  }
  std::map<std::string, int> seen;
  for (const PipelineSpec& p : m.pipelines) {
    if (seen[p.label]++) throw ConfigError("duplicate pipeline label '" + p.label + "'");
    if (p.config.slots == 0) throw ConfigError("pipeline '" + p.label + "' has zero slots");
    p.config.slot_codec_config(1).validate();
    if (p.config.slots > 1) p.config.slot_codec_config(2).validate();
  }
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return parse_manifest(os.str());
}

std::string quantizer_label(const QuantizerSpec& q) {
  if (q.passthrough()) return "none";
  return std::string(quant_mode_name(q.mode)) + "/" + std::to_string(q.bits);
}

std::vector<NmseRow> nmse_rows(const std::string& label, const MarkovNetPipeline& p, const PipelineRun& run,
                               std::uint64_t seed) {
  const auto per_slot = per_slot_nmse(run);
  std::vector<NmseRow> rows;
  for (std::size_t t = 0; t < per_slot.size(); ++t) {
    NmseRow r;
    r.label = label;
    r.mode = mode_str(p.config.mode);
    r.head = head_name(p.config.head);
    r.cr1 = p.config.cr1.str();
    r.cr2 = p.config.mode == PipelineMode::kIndependent ? p.config.cr1.str() : p.config.cr2.str();
    r.spherical = p.config.spherical;
    r.slot = t + 1;
    r.linear = per_slot[t].linear;
    r.db = per_slot[t].db;
    r.excluded = per_slot[t].excluded;
    r.feedback_bits = run.bits_per_sample[t];
    r.quantizer = quantizer_label(p.quantizer_for(t + 1));
    r.seed = seed;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<CostRow> cost_rows(const std::string& label, const PipelineConfig& config) {
  std::vector<CostRow> out;
  const std::size_t last = config.mode == PipelineMode::kDifferential && config.slots > 1 ? 2 : 1;
  for (std::size_t slot = 1; slot <= last; ++slot) {
    CostRow r;
    r.label = label + (slot == 1 ? "/slot1" : "/residual");
    r.config = config.slot_codec_config(slot);
    CodecModel m = build_codec(r.config, 1);
    r.cost = count_cost(m);
    out.push_back(std::move(r));
  }
  return out;
}

void write_header_block(std::ostream& os, const EvalReport& r) {
  os << "# markovnet " << MNET_VERSION << "\n"
     << "# experiment=" << r.name << "\n"
     << "# manifest_fnv1a64=" << r.manifest_hash << "\n"
     << "# seed=" << r.seed << "\n"
     << "# preset=" << r.preset << "\n"
     << "# train_samples=" << r.train_samples << "\n"
     << "# test_samples=" << r.test_samples << "\n";
}

void write_nmse_csv(std::ostream& os, const EvalReport& r) {
  write_header_block(os, r);
  os << "label,mode,head,cr1,cr2,spherical,slot,nmse_linear,nmse_db,excluded,feedback_bits,quantizer,seed,"
        "manifest\n";
  for (const NmseRow& row : r.rows)
    os << row.label << ',' << row.mode << ',' << row.head << ',' << row.cr1 << ',' << row.cr2 << ','
       << (row.spherical ? 1 : 0) << ',' << row.slot << ',' << fmt(row.linear) << ',' << fmt(row.db) << ','
       << row.excluded << ',' << row.feedback_bits << ',' << row.quantizer << ',' << row.seed << ','
       << r.manifest_hash << '\n';
}

void write_cost_csv(std::ostream& os, const EvalReport& r) {
  write_header_block(os, r);
  write_cost_csv_header(os);
  for (const CostRow& c : r.costs) write_cost_csv_row(os, c.label, c.config, c.cost);
}

void write_report(const EvalReport& report, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  for (const char* name : {"nmse.csv", "cost.csv"}) {
    const std::string path = dir + "/" + name;
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    if (std::string(name) == "nmse.csv")
      write_nmse_csv(os, report);
    else
      write_cost_csv(os, report);
    if (!os) throw IoError("write failed for " + path);
  }
}

std::vector<QuantSweepRow> quant_sweep(MarkovNetPipeline p, const CsiSequence& data,
                                       const std::vector<unsigned>& bits, const std::vector<QuantMode>& modes,
                                       double mu) {
  auto summarize = [&](const PipelineRun& run) {
    std::vector<double> lin;
    double mean = 0.0;
    for (const Nmse& n : per_slot_nmse(run)) {
      lin.push_back(n.linear);
      mean += n.linear;
    }
    lin.insert(lin.begin(), mean / static_cast<double>(run.truth.size()));
    return lin;
  };
  p.quantizer = QuantizerSpec{};
  const std::vector<double> base = summarize(run_pipeline(p, data));
  std::vector<QuantSweepRow> rows;
  for (QuantMode mode : modes)
    for (unsigned b : bits) {
      p.quantizer = QuantizerSpec{b, mu, mode};
      p.quantizer.validate();
      const PipelineRun run = run_pipeline(p, data);
      const std::vector<double> q = summarize(run);
      std::uint64_t total_bits = 0;
      for (std::uint64_t v : run.bits_per_sample) total_bits += v;
      for (std::size_t t = 0; t < q.size(); ++t) {
        QuantSweepRow r;
        r.mode = quant_mode_name(mode);
        r.bits = b;
        r.slot = t;
        r.base_db = to_db(base[t]);
        r.nmse_db = to_db(q[t]);
        r.degradation_db = r.nmse_db - r.base_db;
        r.feedback_bits = t == 0 ? total_bits : run.bits_per_sample[t - 1];
        rows.push_back(r);
      }
    }
  return rows;
}

void write_quant_sweep_csv(std::ostream& os, const std::vector<QuantSweepRow>& rows) {
  os << "mode,bits,slot,base_nmse_db,nmse_db,degradation_db,feedback_bits\n";
  for (const QuantSweepRow& r : rows)
    os << r.mode << ',' << r.bits << ',' << (r.slot == 0 ? std::string("mean") : std::to_string(r.slot)) << ','
       << fmt(r.base_db) << ',' << fmt(r.nmse_db) << ',' << fmt(r.degradation_db) << ',' << r.feedback_bits << '\n';
}

EvalReport run_experiment(const ExperimentManifest& m, const std::function<void(const std::string&)>& log) {
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  CsiSequence all;
  if (m.dataset.path.empty()) {
    say("generating " + std::to_string(m.dataset.train + m.dataset.test) + " samples");
    all = generate(m.dataset.channel, m.dataset.train + m.dataset.test);
  } else {
    if (!std::filesystem::exists(m.dataset.path)) throw IoError("dataset not found: " + m.dataset.path);
    all = load_dataset(m.dataset.path);
    if (all.samples < m.dataset.train + m.dataset.test)
      throw ConfigError("dataset " + m.dataset.path + " holds " + std::to_string(all.samples) +
                        " samples, fewer than train + test");
  }
  const CsiSequence train = all.subset(0, m.dataset.train);
  const CsiSequence test = all.subset(m.dataset.train, m.dataset.train + m.dataset.test);

  EvalReport report;
  report.name = m.name;
  report.manifest_hash = m.hash();
  report.seed = m.seed;
  report.preset = all.preset;
  report.train_samples = train.samples;
  report.test_samples = test.samples;

  std::map<std::string, SlotStage> slot1_cache;
  for (const PipelineSpec& spec : m.pipelines) {
    if (spec.config.slots > all.slots)
      throw ConfigError("pipeline '" + spec.label + "' wants " + std::to_string(spec.config.slots) +
                        " slots but the dataset has " + std::to_string(all.slots));
    PipelineConfig config = spec.config;
    config.codec.rows = all.rows;
    config.codec.cols = all.cols;
    MarkovNetPipeline p;
    if (!spec.checkpoint.empty()) {
      say(spec.label + ": loading " + spec.checkpoint);
      p = load_pipeline(spec.checkpoint);
      if (p.slots() < spec.config.slots)
        throw ConfigError("checkpoint " + spec.checkpoint + " has fewer slots than pipeline '" + spec.label + "'");
    } else {
      ScheduleOptions s = m.schedule;
      s.on_epoch = [&](std::size_t slot, std::size_t epoch, double loss) {
        if (epoch % 10 == 0) say(spec.label + ": slot " + std::to_string(slot) + " epoch " + std::to_string(epoch) +
                                 " loss " + fmt(loss));
      };
      const std::string key = slot1_key(config);
      auto hit = slot1_cache.find(key);
      PipelineTraining tr = train_pipeline(train, config, s, hit == slot1_cache.end() ? nullptr : &hit->second);
      if (hit == slot1_cache.end()) slot1_cache.emplace(key, tr.pipeline.stages[0]);
      p = std::move(tr.pipeline);
    }
    p.quantizer = m.quantizer;
    const PipelineRun run = run_pipeline(p, test);
    for (NmseRow& row : nmse_rows(spec.label, p, run, m.seed)) {
      if (row.slot > spec.config.slots) break;
      report.rows.push_back(std::move(row));
    }
    for (CostRow& c : cost_rows(spec.label, p.config)) report.costs.push_back(std::move(c));
    say(spec.label + ": done");
  }
  return report;
}

}  // namespace mnet
