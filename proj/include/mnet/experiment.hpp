#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mnet/eval.hpp"

namespace mnet {

std::uint64_t fnv1a64(std::string_view bytes);

struct DatasetSpec {
  std::string path;       // load from here when set, otherwise generate
  ChannelConfig channel;  // generator settings (ignored when loading)
  std::size_t train = 5000;
  std::size_t test = 1000;
};

struct PipelineSpec {
  std::string label;
  PipelineConfig config;
  std::string checkpoint;  // saved pipeline directory; trained when empty
};

/// Parsed experiment manifest. `canonical` is the normalized JSON the hash
/// is taken over, so formatting changes do not change the hash.
struct ExperimentManifest {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  DatasetSpec dataset;
  std::vector<PipelineSpec> pipelines;
  ScheduleOptions schedule;
  QuantizerSpec quantizer;
  std::string canonical;

  std::string hash() const;
};

/// Throws ConfigError on unknown keys, bad values or malformed JSON.
ExperimentManifest parse_manifest(const std::string& json_text);
/// Throws IoError when the file cannot be read.
ExperimentManifest load_manifest(const std::string& path);

struct NmseRow {
  std::string label;
  std::string mode;
  std::string head;
  std::string cr1;
  std::string cr2;
  bool spherical = true;
  std::size_t slot = 0;  // 1-based
  double linear = 0.0;
  double db = 0.0;
  std::size_t excluded = 0;
  std::uint64_t feedback_bits = 0;
  std::string quantizer;  // "none" or "<mode>/<bits>"
  std::uint64_t seed = 0;
};

struct CostRow {
  std::string label;
  CodecConfig config;
  CostReport cost;
};

struct EvalReport {
  std::string name;
  std::string manifest_hash;
  std::uint64_t seed = 0;
  std::string preset;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  std::vector<NmseRow> rows;
  std::vector<CostRow> costs;
};

std::string quantizer_label(const QuantizerSpec& q);

/// One row per slot of `run`.
std::vector<NmseRow> nmse_rows(const std::string& label, const MarkovNetPipeline& p, const PipelineRun& run,
                               std::uint64_t seed);

/// Cost of the slot-1 codec and, for differential pipelines, the shared
/// residual codec.
std::vector<CostRow> cost_rows(const std::string& label, const PipelineConfig& config);

void write_header_block(std::ostream& os, const EvalReport& report);
/// dB is written as "-inf" for a perfect reconstruction.
void write_nmse_csv(std::ostream& os, const EvalReport& report);
void write_cost_csv(std::ostream& os, const EvalReport& report);
/// Writes `dir`/nmse.csv and `dir`/cost.csv.
void write_report(const EvalReport& report, const std::string& dir);

struct QuantSweepRow {
  std::string mode;      // quantizer mode name
  unsigned bits = 0;
  std::size_t slot = 0;  // 1-based; 0 is the mean over slots
  double base_db = 0.0;  // unquantized NMSE
  double nmse_db = 0.0;
  double degradation_db = 0.0;
  std::uint64_t feedback_bits = 0;  // total over the slots covered by the row
};

/// Runs `p` unquantized and then with every (mode, bits) pair. The slot-0
/// row compares the slot-averaged linear NMSE.
std::vector<QuantSweepRow> quant_sweep(MarkovNetPipeline p, const CsiSequence& data,
                                       const std::vector<unsigned>& bits, const std::vector<QuantMode>& modes,
                                       double mu);
void write_quant_sweep_csv(std::ostream& os, const std::vector<QuantSweepRow>& rows);

/// Builds or loads the dataset, trains (or loads) every pipeline in
/// manifest order and evaluates it on the test split. Pipelines whose
/// slot-1 settings match share one slot-1 codec.
EvalReport run_experiment(const ExperimentManifest& manifest,
                          const std::function<void(const std::string&)>& log = {});

}  // namespace mnet
