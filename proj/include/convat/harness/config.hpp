#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "convat/model/cnn.hpp"
#include "convat/model/optimizer.hpp"
#include "convat/regularizers/convat.hpp"
#include "convat/textdata/corpus.hpp"

namespace convat::harness {

/// Bad configuration (unknown key, wrong type, out-of-range value). Exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Regime { Ce, Vat, Convat };
Regime parse_regime(std::string_view name);
std::string_view regime_name(Regime r);

struct SyntheticSpec {
  std::size_t num_examples = 6000;
  std::size_t num_classes = 4;
  std::size_t vocab_size = 1000;
  std::uint64_t seed = 7;
  double train_fraction = 0.70;
  double dev_fraction = 0.15;
};

struct RunConfig {
  // data
  textdata::DatasetFormat format = textdata::DatasetFormat::Synthetic;
  std::string dataset;        // train file
  std::string dev_path;       // optional; held out from train when empty
  std::string test_path;      // optional; held out from train when empty
  std::size_t num_classes = 0;  // tsv only
  std::string embeddings_path;
  std::size_t min_freq = 1;
  SyntheticSpec synthetic;

  // noise
  std::string noise = "uniform";  // uniform | random | custom:<path>
  double noise_rate = 0.0;
  std::uint64_t noise_seed = 0;  // 0 = derive from the run seed

  // training
  Regime regime = Regime::Ce;
  reg::ConvatConfig convat;
  model::OptimizerConfig optimizer;
  std::size_t batch_size = 50;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;  // 0 disables early stopping

  // model
  std::size_t embed_dim = 50;
  std::vector<std::size_t> windows{3, 4, 5};
  std::size_t filters = 100;
  std::size_t depth = 0;

  std::uint64_t seed = 1;
  std::string out_dir;
  bool wall_clock_metrics = false;  // real timings in metrics.csv (breaks byte determinism)
  std::size_t jobs = 0;             // sweep workers; 0 = hardware concurrency

  void validate() const;
};

/// Applies a flat JSON object of scalars and lists onto `cfg`. Keys use the CLI
/// flag spelling (`noise-rate`); underscores are accepted in place of dashes.
void apply_config_json(RunConfig& cfg, const std::string& json_text);
void apply_config_file(RunConfig& cfg, const std::string& path);
/// Single key/value (value as JSON text, e.g. `0.3`, `"convat"`, `[3,4]`).
void apply_config_value(RunConfig& cfg, std::string_view key, const std::string& json_value);

/// Flat JSON rendering of every field (used in run manifests).
std::string to_json(const RunConfig& cfg);

/// Evenly spaced grid lo, lo+step, ..., hi computed as lo + i*step.
std::vector<double> make_grid(double lo, double hi, double step);

}  // namespace convat::harness
