#pragma once

#include <string>
#include <vector>

#include "convat/harness/bench.hpp"
#include "convat/harness/experiment.hpp"
#include "convat/harness/sweep.hpp"

namespace convat::harness {

/// Train/dev/test accuracy against epoch. Empty string for an empty record.
std::string run_curves_svg(const RunRecord& record, const std::string& title);

/// Mean test and dev accuracy per axis value with ±1 std bands.
std::string sweep_svg(const SweepResult& result, const std::string& title);

/// Mean step time per regime against depth.
std::string cost_svg(const CostTable& table, const std::string& title);

/// Writes one SVG per non-empty record (`<prefix><i>.svg`); warns on stderr and
/// skips empty ones. Returns the paths written.
std::vector<std::string> emit_plots(const std::vector<RunRecord>& records, const std::string& dir,
                                    const std::string& prefix = "run_");

}  // namespace convat::harness
