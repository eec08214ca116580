#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "convat/harness/config.hpp"

namespace convat::harness {

struct CostRow {
  std::size_t depth = 0;
  Regime regime = Regime::Ce;
  double mean_step_ms = 0.0;
  std::int64_t peak_bytes = 0;  // peak transient heap above the step's starting point
  double encoder_forwards_per_step = 0.0;
  double encoder_backwards_per_step = 0.0;
};

struct CostOverhead {
  std::size_t depth = 0;
  double overhead_convat_ms = 0.0;  // t(convat) - t(ce)
  double overhead_vat_ms = 0.0;     // t(vat) - t(ce)
  double ce_control_ms = 0.0;       // second ce measurement, for noise estimation
};

struct CostTable {
  std::vector<CostRow> rows;
  std::vector<CostOverhead> overheads;
  double slope_convat = 0.0;  // ms per unit depth, least squares
  double slope_vat = 0.0;
  /// Mean over depths of overhead_vat / overhead_convat (reported, not asserted).
  double mean_ratio = 0.0;
};

struct BenchOptions {
  std::size_t steps = 200;
  std::size_t warmup = 20;
};

/// Times training steps (forward, loss, backward, optimizer update) for each
/// regime at each depth on a fixed synthetic batch stream.
CostTable benchmark_cost(const RunConfig& cfg, const std::vector<std::size_t>& depths,
                         const BenchOptions& options = {});

/// Least-squares slope of y on x.
double linear_slope(const std::vector<double>& x, const std::vector<double>& y);

std::string cost_table_csv(const CostTable& t);
std::string cost_overhead_csv(const CostTable& t);

}  // namespace convat::harness
