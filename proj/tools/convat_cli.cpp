// convat: train, sweep and benchmark context-level adversarial smoothing
// against CE and input-level VAT on text classification with noisy labels.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "convat/harness/bench.hpp"
#include "convat/harness/config.hpp"
#include "convat/harness/experiment.hpp"
#include "convat/harness/plots.hpp"
#include "convat/harness/sweep.hpp"
#include "convat/harness/synthetic.hpp"
#include "convat/model/cnn.hpp"
#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"
#include "convat/noise/transition.hpp"
#include "convat/textdata/parsers.hpp"
#include "convat/textdata/vocab.hpp"

namespace fs = std::filesystem;
using namespace convat;
using namespace convat::harness;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

// Config flags are collected as raw text and routed through the same setters
// as the JSON file, after the file has been applied.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  bool wall_clock = false;
  CLI::Option* wall_clock_opt = nullptr;

  void add(CLI::App* app, const std::string& key, const std::string& help) {
    options[key] = app->add_option("--" + key, values[key], help);
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) apply_config_value(cfg, key, values.at(key));
    }
    if (wall_clock_opt && wall_clock_opt->count() > 0) cfg.wall_clock_metrics = true;
    cfg.validate();
    return cfg;
  }
};

void add_data_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_file, "JSON config file (CLI flags override it)");
  f.add(app, "dataset", "training file (or the whole dataset when --dev/--test are absent)");
  f.add(app, "dev", "dev file");
  f.add(app, "test", "test file");
  f.add(app, "format", "trec | agnews | sst2 | dbpedia | tsv | synthetic");
  f.add(app, "num-classes", "class count for tsv data");
  f.add(app, "min-freq", "minimum token count for the vocabulary");
  f.add(app, "synth-examples", "synthetic corpus size");
  f.add(app, "synth-classes", "synthetic class count");
  f.add(app, "synth-vocab", "synthetic vocabulary size");
  f.add(app, "synth-seed", "synthetic corpus seed");
  f.add(app, "synth-train-frac", "synthetic train fraction");
  f.add(app, "synth-dev-frac", "synthetic dev fraction");
  f.add(app, "noise", "uniform | random | custom:<path>");
  f.add(app, "noise-rate", "label noise rate in [0,1]");
  f.add(app, "noise-seed", "label noise seed (0 derives it from --seed)");
  f.add(app, "seed", "run seed");
  f.add(app, "out", "output directory");
}

void add_run_flags(CLI::App* app, ConfigFlags& f) {
  add_data_flags(app, f);
  f.add(app, "embeddings", "pretrained vectors, one `token v1 .. vd` per line");
  f.add(app, "regime", "ce | vat | convat");
  f.add(app, "epsilon", "perturbation norm");
  f.add(app, "xi", "probe scale");
  f.add(app, "lambda", "smoothing weight");
  f.add(app, "power-iters", "power-method iterations");
  f.add(app, "cls-scope", "full | softmax_only");
  f.add(app, "optimizer", "adam | sgd");
  f.add(app, "lr", "learning rate");
  f.add(app, "batch-size", "examples per step");
  f.add(app, "max-epochs", "epoch budget");
  f.add(app, "patience", "epochs without dev improvement before stopping (0 = never)");
  f.add(app, "embed-dim", "embedding width");
  f.add(app, "windows", "conv window sizes, e.g. 3,4,5");
  f.add(app, "filters", "filters per window size");
  f.add(app, "depth", "extra conv blocks per bank");
  f.add(app, "jobs", "sweep workers (0 = all cores)");
  f.wall_clock_opt = app->add_flag("--wall-clock-metrics", f.wall_clock,
                                   "write real epoch times into metrics.csv (not byte-deterministic)");
}

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " value '" + part + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
  return out;
}

fs::path out_dir(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("--out is required");
  fs::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

void report_sweep(const SweepResult& r, const RunConfig& cfg) {
  const auto dir = out_dir(cfg);
  write_file_atomic((dir / "sweep_cells.csv").string(), sweep_cells_csv(r));
  write_file_atomic((dir / "sweep_summary.csv").string(), sweep_summary_csv(r));
  const auto svg = sweep_svg(r, std::string(regime_name(cfg.regime)) + " " + r.axis + " sweep");
  if (!svg.empty()) write_file_atomic((dir / "sweep.svg").string(), svg);
  std::cout << sweep_summary_csv(r);
  std::size_t failed = 0;
  for (const auto& c : r.cells) {
    if (!c.ok) {
      ++failed;
      std::cerr << "cell " << r.axis << "=" << c.value << " seed=" << c.seed << " failed: " << c.error << "\n";
    }
  }
  std::cout << "best " << r.axis << " by dev accuracy: " << r.best_value << "\n";
  if (failed) std::cerr << failed << " of " << r.cells.size() << " cells failed\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convat: adversarial context smoothing for text classification under label noise"};
  app.require_subcommand(1);

  ConfigFlags run_f, noise_f, eps_f, bench_f, synth_f, corrupt_f;

  auto* run = app.add_subcommand("run", "train one configuration");
  add_run_flags(run, run_f);

  auto* sweep_noise_cmd = app.add_subcommand("sweep-noise", "noise-rate x seed grid");
  add_run_flags(sweep_noise_cmd, noise_f);
  std::string rates = "0.0,0.1,0.2,0.3,0.4,0.5", noise_seeds = "1,2,3,4,5";
  sweep_noise_cmd->add_option("--rates", rates, "comma-separated noise rates")->capture_default_str();
  sweep_noise_cmd->add_option("--seeds", noise_seeds, "comma-separated run seeds")->capture_default_str();

  auto* sweep_eps_cmd = app.add_subcommand("sweep-eps", "epsilon x seed grid");
  add_run_flags(sweep_eps_cmd, eps_f);
  std::string epsilons, eps_seeds = "1,2,3,4,5";
  double eps_step = 0.1;
  sweep_eps_cmd->add_option("--epsilons", epsilons, "comma-separated values (default 0.0..3.0)");
  sweep_eps_cmd->add_option("--eps-step", eps_step, "step of the default 0..3 grid")->capture_default_str();
  sweep_eps_cmd->add_option("--seeds", eps_seeds, "comma-separated run seeds")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "per-step cost of ce, convat and vat across depths");
  add_run_flags(bench, bench_f);
  std::string depths = "0,2,4";
  BenchOptions bopt;
  bench->add_option("--depths", depths, "comma-separated extra depths")->capture_default_str();
  bench->add_option("--steps", bopt.steps, "timed steps per regime")->capture_default_str();
  bench->add_option("--warmup", bopt.warmup, "discarded warm-up steps")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus as train/dev/test tsv");
  add_data_flags(synth, synth_f);

  auto* corrupt = app.add_subcommand("corrupt", "write a label-corrupted copy of a dataset");
  add_data_flags(corrupt, corrupt_f);
  std::string corrupt_out, audit_out;
  corrupt->add_option("--output", corrupt_out, "corrupted dataset path")->required();
  corrupt->add_option("--audit", audit_out, "audit CSV path");

  auto* export_ctx = app.add_subcommand("export-context", "dump context vectors as CSV");
  std::string ckpt, vocab_path, ex_dataset, ex_format = "tsv", ex_out;
  std::size_t ex_classes = 0;
  export_ctx->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  export_ctx->add_option("--vocab", vocab_path, "vocabulary file written by run")->required();
  export_ctx->add_option("--dataset", ex_dataset, "examples to encode")->required();
  export_ctx->add_option("--format", ex_format, "dataset format")->capture_default_str();
  export_ctx->add_option("--num-classes", ex_classes, "class count for tsv data");
  export_ctx->add_option("--out", ex_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*run) {
      const auto cfg = run_f.resolve();
      const auto rec = run_experiment(cfg);
      if (cfg.out_dir.empty()) std::cout << metrics_csv(rec);
      std::cerr << "chosen epoch " << rec.chosen_epoch << ", dev " << rec.best_dev_acc << ", test "
                << rec.final_test_acc << "\n";
    } else if (*sweep_noise_cmd) {
      const auto cfg = noise_f.resolve();
      std::vector<std::uint64_t> seeds;
      for (double s : parse_doubles(noise_seeds, "seed")) seeds.push_back(static_cast<std::uint64_t>(s));
      report_sweep(sweep_noise(cfg, parse_doubles(rates, "rate"), seeds), cfg);
    } else if (*sweep_eps_cmd) {
      const auto cfg = eps_f.resolve();
      std::vector<std::uint64_t> seeds;
      for (double s : parse_doubles(eps_seeds, "seed")) seeds.push_back(static_cast<std::uint64_t>(s));
      const auto grid = epsilons.empty() ? make_grid(0.0, 3.0, eps_step) : parse_doubles(epsilons, "epsilon");
      report_sweep(sweep_epsilon(cfg, grid, seeds), cfg);
    } else if (*bench) {
      const auto cfg = bench_f.resolve();
      std::vector<std::size_t> ds;
      for (double d : parse_doubles(depths, "depth")) {
        if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d))) throw ConfigError("depths must be integers >= 0");
        ds.push_back(static_cast<std::size_t>(d));
      }
      const auto table = benchmark_cost(cfg, ds, bopt);
      std::cout << cost_table_csv(table) << cost_overhead_csv(table);
      std::cout << "slope_convat_ms_per_block " << table.slope_convat << "\nslope_vat_ms_per_block "
                << table.slope_vat << "\nmean_vat_to_convat_overhead_ratio " << table.mean_ratio << "\n";
      if (!cfg.out_dir.empty()) {
        const auto dir = out_dir(cfg);
        write_file_atomic((dir / "cost_table.csv").string(), cost_table_csv(table));
        write_file_atomic((dir / "cost_overhead.csv").string(), cost_overhead_csv(table));
        write_file_atomic((dir / "cost.svg").string(), cost_svg(table, "step time vs depth"));
      }
    } else if (*synth) {
      const auto cfg = synth_f.resolve();
      write_synthetic_corpus(make_synthetic_corpus(cfg.synthetic), out_dir(cfg).string());
    } else if (*corrupt) {
      const auto cfg = corrupt_f.resolve();
      if (cfg.format == textdata::DatasetFormat::Synthetic) throw ConfigError("corrupt needs a dataset file");
      auto corpus = textdata::parse_dataset(cfg.dataset, cfg.format, cfg.num_classes);
      const auto phi = make_transition(cfg, corpus.num_classes);
      const auto seed = cfg.noise_seed != 0 ? cfg.noise_seed : derive_seed(cfg.seed, {4});
      auto [noisy, audit] = noise::corrupt_labels(corpus, phi, seed);
      textdata::write_dataset(noisy, corrupt_out);
      if (!audit_out.empty()) noise::write_audit_csv(audit, audit_out);
      std::cerr << "flipped " << audit.flip_fraction * 100.0 << "% of " << audit.total << " labels\n";
    } else if (*export_ctx) {
      const auto params = model::load_checkpoint(ckpt);
      auto vocab = std::make_shared<const textdata::Vocabulary>(textdata::Vocabulary::load(vocab_path));
      if (vocab->size() != params.embeddings.rows()) {
        throw FormatError("vocabulary has " + std::to_string(vocab->size()) + " tokens but the checkpoint has " +
                          std::to_string(params.embeddings.rows()) + " embedding rows");
      }
      textdata::DatasetFormat fmt;
      try {
        fmt = textdata::parse_format(ex_format);
      } catch (const InvalidInputError& e) {
        throw ConfigError(e.what());
      }
      const auto corpus = textdata::index_corpus(textdata::parse_dataset(ex_dataset, fmt, ex_classes), vocab);
      model::export_context_csv(params, corpus, ex_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const InvalidInputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DimensionError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
