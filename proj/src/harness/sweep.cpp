#include "convat/harness/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>

#include "convat/harness/experiment.hpp"

namespace convat::harness {
namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

SweepCell cell_from(double value, std::uint64_t seed, const RunRecord& r) {
  SweepCell c;
  c.value = value;
  c.seed = seed;
  c.ok = true;
  c.final_test_acc = r.final_test_acc;
  c.best_dev_acc = r.best_dev_acc;
  c.chosen_epoch = r.chosen_epoch;
  c.last_test_acc = r.epochs.empty() ? 0.0 : r.epochs.back().test_acc;
  return c;
}

}  // namespace

std::vector<std::uint64_t> default_seeds() { return {1, 2, 3, 4, 5}; }

std::vector<double> default_epsilon_grid() { return make_grid(0.0, 3.0, 0.1); }

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

SweepResult run_sweep(const std::string& axis, const std::vector<double>& values,
                      const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                      const std::function<SweepCell(double, std::uint64_t)>& cell_fn) {
  if (values.empty() || seeds.empty()) throw ConfigError("sweep needs at least one value and one seed");
  SweepResult result;
  result.axis = axis;
  result.values = values;
  result.seeds = seeds;
  result.cells.resize(values.size() * seeds.size());

  auto run_cell = [&](std::size_t i) {
    const double v = values[i / seeds.size()];
    const std::uint64_t s = seeds[i % seeds.size()];
    try {
      result.cells[i] = cell_fn(v, s);
    } catch (const std::exception& e) {
      SweepCell c;
      c.value = v;
      c.seed = s;
      c.error = e.what();
      result.cells[i] = c;
    }
  };

  std::size_t workers = jobs != 0 ? jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, result.cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < result.cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < result.cells.size(); i = next++) run_cell(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  bool have_best = false;
  double best_dev = 0.0;
  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    std::vector<double> test, dev;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto& c = result.cells[vi * seeds.size() + si];
      if (!c.ok) continue;
      test.push_back(c.final_test_acc);
      dev.push_back(c.best_dev_acc);
    }
    SweepSummary s;
    s.value = values[vi];
    s.runs = test.size();
    std::tie(s.mean_test, s.std_test) = mean_std(test);
    std::tie(s.mean_dev, s.std_dev) = mean_std(dev);
    result.summary.push_back(s);
    if (s.runs == 0) continue;
    // Strict improvement, visiting values in ascending order: ties keep the lower value.
    const bool better = !have_best || s.mean_dev > best_dev ||
                        (s.mean_dev == best_dev && s.value < result.best_value);
    if (better) {
      have_best = true;
      best_dev = s.mean_dev;
      result.best_value = s.value;
    }
  }
  return result;
}

SweepResult sweep_noise(const RunConfig& cfg, const std::vector<double>& rates,
                        const std::vector<std::uint64_t>& seeds) {
  for (double r : rates) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("noise rates must lie in [0,1)");
  }
  return run_sweep("noise_rate", rates, seeds, cfg.jobs, [&](double rate, std::uint64_t seed) {
    RunConfig c = cfg;
    c.noise_rate = rate;
    c.seed = seed;
    c.out_dir.clear();
    return cell_from(rate, seed, run_experiment(c));
  });
}

SweepResult sweep_epsilon(const RunConfig& cfg, const std::vector<double>& epsilons,
                          const std::vector<std::uint64_t>& seeds) {
  for (double e : epsilons) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("epsilon values must be finite and >= 0");
  }
  return run_sweep("epsilon", epsilons, seeds, cfg.jobs, [&](double eps, std::uint64_t seed) {
    RunConfig c = cfg;
    if (c.regime == Regime::Ce) c.regime = Regime::Convat;
    c.convat.epsilon = eps;
    c.seed = seed;
    c.out_dir.clear();
    return cell_from(eps, seed, run_experiment(c));
  });
}

std::string sweep_cells_csv(const SweepResult& r) {
  std::string out = r.axis + ",seed,ok,final_test_acc,best_dev_acc,chosen_epoch,last_test_acc,error\n";
  for (const auto& c : r.cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += num(c.value) + "," + std::to_string(c.seed) + "," + (c.ok ? "1" : "0") + "," +
           num(c.final_test_acc) + "," + num(c.best_dev_acc) + "," + std::to_string(c.chosen_epoch) + "," +
           num(c.last_test_acc) + "," + err + "\n";
  }
  return out;
}

std::string sweep_summary_csv(const SweepResult& r) {
  std::string out = r.axis + ",runs,mean_test,std_test,mean_dev,std_dev,best\n";
  for (const auto& s : r.summary) {
    out += num(s.value) + "," + std::to_string(s.runs) + "," + num(s.mean_test) + "," + num(s.std_test) +
           "," + num(s.mean_dev) + "," + num(s.std_dev) + "," + (s.value == r.best_value && s.runs > 0 ? "1" : "0") +
           "\n";
  }
  return out;
}

}  // namespace convat::harness
