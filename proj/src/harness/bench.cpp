#include "convat/harness/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>

#include "convat/harness/synthetic.hpp"
#include "convat/model/optimizer.hpp"
#include "convat/netcore/memstat.hpp"
#include "convat/netcore/rng.hpp"
#include "convat/regularizers/convat.hpp"
#include "convat/textdata/batching.hpp"
#include "convat/textdata/vocab.hpp"

namespace convat::harness {
namespace {

// ce, convat, vat, then a second ce as a noise control.
constexpr std::array<Regime, 4> kSlots{Regime::Ce, Regime::Convat, Regime::Vat, Regime::Ce};

struct Slot {
  model::ModelParams params;
  model::Optimizer opt;
  double total_ms = 0.0;
  std::int64_t peak = 0;
  std::uint64_t forwards = 0;
  std::uint64_t backwards = 0;
};

void step(Slot& s, Regime regime, const textdata::Batch& batch, const reg::ConvatConfig& cc,
            std::uint64_t seed, bool measure) {
  auto& ctr = model::counters();
  const auto before = ctr;
  memstat::reset_peak();
  const auto t0 = std::chrono::steady_clock::now();

  const auto caches = model::encode(s.params, batch);
  reg::LossResult loss;
  switch (regime) {
    case Regime::Ce: loss = reg::ce_loss(s.params, caches, batch.labels); break;
    case Regime::Convat: loss = reg::convat_loss(s.params, caches, batch.labels, cc, seed); break;
    case Regime::Vat: loss = reg::vat_loss(s.params, caches, batch.labels, cc, seed); break;
  }
  s.opt.step(s.params, loss.grads);

  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (measure) {
    s.total_ms += ms;
    s.peak = std::max(s.peak, memstat::peak_transient_bytes());
    s.forwards += ctr.forward_passes - before.forward_passes;
    s.backwards += ctr.backward_passes - before.backward_passes;
  }
}

}  // namespace

double linear_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return 0.0;
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

CostTable benchmark_cost(const RunConfig& cfg, const std::vector<std::size_t>& depths,
                         const BenchOptions& options) {
  if (depths.empty()) throw ConfigError("bench needs at least one depth");
  if (options.steps == 0) throw ConfigError("bench needs steps >= 1");
  cfg.validate();

  // Cost depends on shapes, not on the data source, so a synthetic stream is enough.
  const auto splits = make_synthetic_corpus(cfg.synthetic);
  auto vocab = std::make_shared<const textdata::Vocabulary>(textdata::build_vocab(splits.train));
  const auto train = textdata::index_corpus(splits.train, vocab);

  reg::ConvatConfig cc = cfg.convat;
  // A zero lambda or epsilon would silently time plain CE under the regularizer names.
  if (cc.lambda == 0.0) cc.lambda = 1.0;
  if (cc.epsilon == 0.0) cc.epsilon = 1.0;

  CostTable table;
  std::vector<double> xs, oc, ov;
  for (std::size_t depth : depths) {
    model::ModelConfig mcfg;
    mcfg.vocab_size = vocab->size();
    mcfg.embed_dim = cfg.embed_dim;
    mcfg.windows = cfg.windows;
    mcfg.filters = cfg.filters;
    mcfg.depth = depth;
    mcfg.num_classes = train.num_classes;
    const auto init = model::init_params(mcfg, derive_seed(cfg.seed, {depth}));
    const auto batches = textdata::make_batches(train, cfg.batch_size, init.max_window(), cfg.seed);

    std::vector<Slot> slots;
    for (std::size_t k = 0; k < kSlots.size(); ++k) slots.push_back(Slot{init, model::Optimizer(cfg.optimizer, init)});

    // Regimes take turns step by step so clock drift and cache state hit all of them alike.
    const std::size_t total = options.warmup + options.steps;
    for (std::size_t t = 0; t < total; ++t) {
      const auto& batch = batches[t % batches.size()];
      const std::uint64_t seed = derive_seed(cfg.seed, {depth, t});
      for (std::size_t k = 0; k < kSlots.size(); ++k) step(slots[k], kSlots[k], batch, cc, seed, t >= options.warmup);
    }

    const auto steps = static_cast<double>(options.steps);
    for (std::size_t k = 0; k + 1 < kSlots.size(); ++k) {
      CostRow row;
      row.depth = depth;
      row.regime = kSlots[k];
      row.mean_step_ms = slots[k].total_ms / steps;
      row.peak_bytes = slots[k].peak;
      row.encoder_forwards_per_step = static_cast<double>(slots[k].forwards) / steps;
      row.encoder_backwards_per_step = static_cast<double>(slots[k].backwards) / steps;
      table.rows.push_back(row);
    }
    CostOverhead o;
    o.depth = depth;
    const double ce = slots[0].total_ms / steps;
    o.overhead_convat_ms = slots[1].total_ms / steps - ce;
    o.overhead_vat_ms = slots[2].total_ms / steps - ce;
    o.ce_control_ms = slots[3].total_ms / steps;
    table.overheads.push_back(o);
    xs.push_back(static_cast<double>(depth));
    oc.push_back(o.overhead_convat_ms);
    ov.push_back(o.overhead_vat_ms);
  }
  table.slope_convat = linear_slope(xs, oc);
  table.slope_vat = linear_slope(xs, ov);
  double ratio_sum = 0.0;
  std::size_t ratio_n = 0;
  for (const auto& o : table.overheads) {
    if (o.overhead_convat_ms > 0.0) {
      ratio_sum += o.overhead_vat_ms / o.overhead_convat_ms;
      ++ratio_n;
    }
  }
  table.mean_ratio = ratio_n ? ratio_sum / static_cast<double>(ratio_n) : 0.0;
  return table;
}

std::string cost_table_csv(const CostTable& t) {
  std::string out = "depth,regime,mean_step_ms,peak_bytes,encoder_forwards_per_step,encoder_backwards_per_step\n";
  for (const auto& r : t.rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.4f,%lld,%.3f,%.3f\n", r.depth, std::string(regime_name(r.regime)).c_str(),
                  r.mean_step_ms, static_cast<long long>(r.peak_bytes), r.encoder_forwards_per_step,
                  r.encoder_backwards_per_step);
    out += buf;
  }
  return out;
}

std::string cost_overhead_csv(const CostTable& t) {
  std::string out = "depth,overhead_convat_ms,overhead_vat_ms,ce_control_ms\n";
  for (const auto& o : t.overheads) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f,%.4f\n", o.depth, o.overhead_convat_ms, o.overhead_vat_ms,
                  o.ce_control_ms);
    out += buf;
  }
  return out;
}

}  // namespace convat::harness
