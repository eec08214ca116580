#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "convat/harness/config.hpp"

namespace convat::harness {

struct SweepCell {
  double value = 0.0;  // noise rate or epsilon
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_test_acc = 0.0;
  double best_dev_acc = 0.0;
  std::size_t chosen_epoch = 0;
  double last_test_acc = 0.0;  // test accuracy at the final trained epoch
};

struct SweepSummary {
  double value = 0.0;
  std::size_t runs = 0;  // successful runs
  double mean_test = 0.0;
  double std_test = 0.0;
  double mean_dev = 0.0;
  double std_dev = 0.0;
};

struct SweepResult {
  std::string axis;  // "noise_rate" or "epsilon"
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;  // value-major, seed-minor
  std::vector<SweepSummary> summary;
  /// Axis value with the highest mean dev accuracy; lowest value wins ties.
  double best_value = 0.0;
};

inline constexpr std::size_t kDefaultSweepSeeds = 5;
std::vector<std::uint64_t> default_seeds();
/// 0.0, 0.1, ..., 3.0.
std::vector<double> default_epsilon_grid();

/// Runs `cell_fn(value, seed)` for every grid cell on a bounded worker pool.
/// Results are placed by cell index, so output order never depends on scheduling.
SweepResult run_sweep(const std::string& axis, const std::vector<double>& values,
                      const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                      const std::function<SweepCell(double, std::uint64_t)>& cell_fn);

SweepResult sweep_noise(const RunConfig& cfg, const std::vector<double>& rates,
                        const std::vector<std::uint64_t>& seeds);
SweepResult sweep_epsilon(const RunConfig& cfg, const std::vector<double>& epsilons,
                          const std::vector<std::uint64_t>& seeds);

std::string sweep_cells_csv(const SweepResult& r);
std::string sweep_summary_csv(const SweepResult& r);

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(const std::vector<double>& xs);

}  // namespace convat::harness
