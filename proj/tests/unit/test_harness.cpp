#include <doctest.h>

#include <filesystem>
#include <map>
#include <regex>
#include <set>

#include "../support/oracles.hpp"
#include "../support/tempdir.hpp"
#include "convat/harness/bench.hpp"
#include "convat/harness/config.hpp"
#include "convat/harness/experiment.hpp"
#include "convat/harness/plots.hpp"
#include "convat/harness/sweep.hpp"
#include "convat/harness/synthetic.hpp"
#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"

using namespace convat;
using namespace convat::harness;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.synthetic.num_examples = 800;
  cfg.synthetic.num_classes = 3;
  cfg.synthetic.vocab_size = 120;
  cfg.synthetic.seed = 21;
  cfg.embed_dim = 16;
  cfg.windows = {2, 3};
  cfg.filters = 16;
  cfg.optimizer.learning_rate = 3e-3;
  cfg.batch_size = 32;
  cfg.max_epochs = 6;
  cfg.patience = 0;
  return cfg;
}

// Minimal well-formedness check: balanced tags, quoted attributes, known entities.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while (i < s.size()) {
    if (s[i] == '<') {
      const auto end = s.find('>', i);
      if (end == std::string::npos) return false;
      std::string tag = s.substr(i + 1, end - i - 1);
      i = end + 1;
      if (tag.starts_with("?")) {
        if (!tag.ends_with("?")) return false;
        continue;
      }
      if (tag.starts_with("!--")) continue;
      if (tag.starts_with("/")) {
        if (stack.empty() || stack.back() != tag.substr(1)) return false;
        stack.pop_back();
        continue;
      }
      const bool self_closing = tag.ends_with("/");
      if (self_closing) tag.pop_back();
      const auto name = tag.substr(0, tag.find_first_of(" \t\n"));
      static const std::regex name_re("[A-Za-z][A-Za-z0-9:_-]*");
      if (!std::regex_match(name, name_re)) return false;
      if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
      if (stack.empty()) {
        if (root_seen) return false;
        root_seen = true;
      }
      if (!self_closing) stack.push_back(name);
    } else if (s[i] == '&') {
      const auto semi = s.find(';', i);
      if (semi == std::string::npos) return false;
      static const std::set<std::string> entities = {"amp", "lt", "gt", "quot", "apos"};
      if (!entities.contains(s.substr(i + 1, semi - i - 1))) return false;
      i = semi + 1;
    } else {
      ++i;
    }
  }
  return root_seen && stack.empty();
}

RunRecord fake_record(std::size_t epochs, std::uint64_t seed) {
  Rng rng(seed);
  RunRecord r;
  for (std::size_t e = 1; e <= epochs; ++e) {
    EpochRow row;
    row.epoch = e;
    row.train_acc = rng.uniform();
    row.dev_acc = rng.uniform();
    row.test_acc = rng.uniform();
    r.epochs.push_back(row);
  }
  return r;
}

}  // namespace

TEST_CASE("config: JSON, precedence and unknown keys") {
  RunConfig cfg;
  apply_config_json(cfg, R"({"noise-rate": 0.3, "regime": "convat", "windows": [2, 3], "epsilon": 1.5,
                             "cls_scope": "softmax_only", "max-epochs": 7})");
  CHECK(cfg.noise_rate == 0.3);
  CHECK(cfg.regime == Regime::Convat);
  CHECK(cfg.windows == std::vector<std::size_t>{2, 3});
  CHECK(cfg.convat.epsilon == 1.5);
  CHECK(cfg.convat.cls_scope == reg::ClsScope::SoftmaxOnly);
  CHECK(cfg.max_epochs == 7);
  CHECK(cfg.batch_size == 50);  // untouched default

  // a later CLI value overrides the file value
  apply_config_value(cfg, "noise-rate", "0.1");
  apply_config_value(cfg, "regime", "ce");  // bare strings are accepted
  CHECK(cfg.noise_rate == 0.1);
  CHECK(cfg.regime == Regime::Ce);

  CHECK_THROWS_AS(apply_config_json(cfg, R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, R"({"noise-rate": "high"})"), ConfigError);
  CHECK_THROWS_AS(apply_config_json(cfg, "[1, 2]"), ConfigError);

  RunConfig bad;
  bad.noise_rate = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  RunConfig round;
  apply_config_json(round, to_json(cfg));
  CHECK(to_json(round) == to_json(cfg));
}

TEST_CASE("grids") {
  const auto g = default_epsilon_grid();
  REQUIRE(g.size() == 31);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(0.1 * i).epsilon(1e-12));
  CHECK(make_grid(0, 3, 0.5) == std::vector<double>{0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0});
  CHECK(default_seeds().size() == kDefaultSweepSeeds);
  const auto [m, s] = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m == 2.5);
  CHECK(s == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_std({2.0}).second == 0.0);
  CHECK(linear_slope({0, 1, 2, 3}, {1, 3, 5, 7}) == doctest::Approx(2.0));
}

TEST_CASE("synthetic corpus: separable, deterministic, uniform priors") {
  SyntheticSpec spec;
  spec.num_examples = 10000;
  spec.num_classes = 4;
  spec.vocab_size = 200;
  spec.seed = 3;
  const auto a = make_synthetic_corpus(spec);
  CHECK(a.train.examples.size() == 7000);
  CHECK(a.dev.examples.size() == 1500);
  CHECK(a.test.examples.size() == 1500);

  std::map<std::size_t, std::size_t> prior;
  std::size_t total = 0;
  for (const auto* split : {&a.train, &a.dev, &a.test}) {
    for (const auto& ex : split->examples) {
      // bag-of-signal-tokens rule: the class owning the signal tokens
      std::set<std::size_t> owners;
      std::size_t signal = 0, distract = 0;
      for (const auto& tok : ex.tokens) {
        std::smatch m;
        static const std::regex sig("s(\\d+)_(\\d+)"), dis("w\\d+");
        if (std::regex_match(tok, m, sig)) {
          owners.insert(std::stoul(m[1]));
          ++signal;
        } else if (std::regex_match(tok, dis)) {
          ++distract;
        }
      }
      CHECK(owners == std::set<std::size_t>{ex.label});
      CHECK(signal >= 2);
      CHECK(signal <= 4);
      CHECK(distract >= 6);
      CHECK(distract <= 10);
      ++prior[ex.label];
      ++total;
    }
  }
  for (const auto& [k, n] : prior) CHECK(std::abs(static_cast<double>(n) / total - 0.25) <= 0.01);

  const auto b = make_synthetic_corpus(spec);
  for (std::size_t i = 0; i < a.train.examples.size(); i += 97) {
    CHECK(a.train.examples[i].tokens == b.train.examples[i].tokens);
    CHECK(a.train.examples[i].label == b.train.examples[i].label);
  }

  testutil::TempDir dir;
  write_synthetic_corpus(a, dir.file(""));
  for (const char* f : {"train.tsv", "dev.tsv", "test.tsv"}) CHECK(std::filesystem::exists(dir.file(f)));
}

TEST_CASE("clean CE run on separable data; test labels stay clean") {
  auto cfg = small_config();
  cfg.max_epochs = 8;
  const auto data = prepare_data(cfg);
  const auto rec = run_experiment(cfg, data);
  CHECK(rec.epochs.size() == 8);
  CHECK(rec.final_test_acc >= 0.95);

  auto noisy = cfg;
  noisy.noise_rate = 0.4;
  const auto nd = prepare_data(noisy);
  CHECK(nd.test.labels() == data.test.labels());
  CHECK(nd.train.labels() != data.train.labels());
  CHECK(nd.dev.labels() != data.dev.labels());
  CHECK(nd.train_audit.flip_fraction > 0.3);
}

TEST_CASE("max epochs 1 gives one row; metrics CSV layout") {
  auto cfg = small_config();
  cfg.max_epochs = 1;
  const auto rec = run_experiment(cfg);
  REQUIRE(rec.epochs.size() == 1);
  CHECK(rec.chosen_epoch == 1);
  const auto csv = metrics_csv(rec);
  CHECK(csv.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(std::string(kMetricsHeader) == "epoch,train_acc,dev_acc,test_acc,train_loss,cls_mean,epoch_wall_ms,peak_bytes");
}

TEST_CASE("convat with lambda 0 reproduces the CE run") {
  auto cfg = small_config();
  cfg.max_epochs = 3;
  cfg.noise_rate = 0.2;
  const auto ce = run_experiment(cfg);
  cfg.regime = Regime::Convat;
  cfg.convat.lambda = 0.0;
  const auto cv = run_experiment(cfg);
  CHECK(metrics_csv(cv) == metrics_csv(ce));
  CHECK(cv.best_params == ce.best_params);
}

TEST_CASE("persisted outputs: dev-selected checkpoint reproduces the reported test accuracy") {
  testutil::TempDir dir;
  auto cfg = small_config();
  cfg.noise_rate = 0.3;
  cfg.max_epochs = 5;
  cfg.regime = Regime::Convat;
  cfg.out_dir = dir.file("run");
  const auto rec = run_experiment(cfg);
  for (const char* f : {"metrics.csv", "best.ckpt", "vocab.txt", "phi.txt", "audit_train.csv", "audit_dev.csv",
                        "curves.svg", "manifest.json"}) {
    CHECK(std::filesystem::exists(dir.file(std::string("run/") + f)));
  }
  CHECK(testutil::slurp(dir.file("run/metrics.csv")) == metrics_csv(rec));
  double best_dev = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& row : rec.epochs) {
    if (row.dev_acc > best_dev) best_dev = row.dev_acc, best_epoch = row.epoch;
  }
  CHECK(rec.chosen_epoch == best_epoch);
  const auto params = model::load_checkpoint(dir.file("run/best.ckpt"));
  const auto data = prepare_data(cfg);
  CHECK(model::accuracy(params, data.test) == rec.final_test_acc);
  CHECK(rec.final_test_acc == rec.epochs[best_epoch - 1].test_acc);
  CHECK(well_formed_xml(testutil::slurp(dir.file("run/curves.svg"))));
}

TEST_CASE("early stopping honours patience") {
  auto cfg = small_config();
  cfg.max_epochs = 30;
  cfg.patience = 2;
  const auto rec = run_experiment(cfg);
  REQUIRE(!rec.epochs.empty());
  if (rec.epochs.size() < 30) CHECK(rec.epochs.size() == rec.chosen_epoch + 2);
}

TEST_CASE("non-finite training is reported as a numeric failure") {
  auto cfg = small_config();
  cfg.optimizer.learning_rate = 1e200;
  cfg.max_epochs = 3;
  CHECK_THROWS_AS(run_experiment(cfg), NumericError);
}

TEST_CASE("sweeps") {
  auto cfg = small_config();
  cfg.max_epochs = 4;
  cfg.jobs = 2;

  SUBCASE("a single-cell sweep equals the run") {
    const auto sw = sweep_noise(cfg, {0.0}, {1});
    REQUIRE(sw.cells.size() == 1);
    auto one = cfg;
    one.seed = 1;
    const auto rec = run_experiment(one);
    CHECK(sw.cells[0].ok);
    CHECK(sw.cells[0].final_test_acc == rec.final_test_acc);
    CHECK(sw.cells[0].best_dev_acc == rec.best_dev_acc);
  }
  SUBCASE("CE test accuracy falls as noise grows; CSVs are deterministic") {
    cfg.synthetic.num_classes = 4;
    const std::vector<double> rates = {0.0, 0.2, 0.4, 0.6, 0.8};
    const auto a = sweep_noise(cfg, rates, {1, 2});
    const auto b = sweep_noise(cfg, rates, {1, 2});
    CHECK(sweep_cells_csv(a) == sweep_cells_csv(b));
    CHECK(sweep_summary_csv(a) == sweep_summary_csv(b));
    std::vector<double> means;
    for (const auto& s : a.summary) means.push_back(s.mean_test);
    CHECK(oracle::spearman(rates, means) < 0.0);
    CHECK(sweep_cells_csv(a).rfind("noise_rate,seed,ok,final_test_acc,best_dev_acc,chosen_epoch,last_test_acc,error\n", 0) == 0);
    CHECK(well_formed_xml(sweep_svg(a, "noise <sweep> & test")));
  }
  SUBCASE("epsilon 0 matches the CE baseline") {
    cfg.noise_rate = 0.3;
    const auto sw = sweep_epsilon(cfg, {0.0, 1.0}, {3});
    auto base = cfg;
    base.seed = 3;
    const auto ce = run_experiment(base);
    REQUIRE(sw.cells.size() == 2);
    CHECK(sw.cells[0].final_test_acc == ce.final_test_acc);
    CHECK(sw.cells[0].best_dev_acc == ce.best_dev_acc);
    CHECK(sw.axis == "epsilon");
  }
  SUBCASE("failing cells are recorded and the sweep continues") {
    const auto sw = run_sweep("x", {1.0, 2.0}, {1}, 2, [](double v, std::uint64_t s) {
      if (v > 1.5) throw DataError("boom");
      SweepCell c;
      c.value = v;
      c.seed = s;
      c.ok = true;
      c.best_dev_acc = 0.5;
      return c;
    });
    REQUIRE(sw.cells.size() == 2);
    CHECK(sw.cells[0].ok);
    CHECK_FALSE(sw.cells[1].ok);
    CHECK(sw.cells[1].error.find("boom") != std::string::npos);
    CHECK(sw.best_value == 1.0);
  }
  CHECK_THROWS_AS(sweep_noise(cfg, {1.0}, {1}), ConfigError);
}

TEST_CASE("plots") {
  const auto one = fake_record(1, 1);
  const auto svg = run_curves_svg(one, "single");
  CHECK(well_formed_xml(svg));
  static const std::regex poly("<polyline points=\"([^\"]*)\"");
  std::size_t lines = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), poly); it != std::sregex_iterator(); ++it) {
    const auto pts = (*it)[1].str();
    CHECK(std::count(pts.begin(), pts.end(), ',') == 1);
    ++lines;
  }
  CHECK(lines == 3);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(well_formed_xml(run_curves_svg(fake_record(1 + seed % 9, seed), "run <" + std::to_string(seed) + "> & co")));
  }

  auto wild = fake_record(3, 4), tame = wild;
  wild.epochs[0].test_acc = 1.7;
  wild.epochs[1].test_acc = -0.4;
  tame.epochs[0].test_acc = 1.0;
  tame.epochs[1].test_acc = 0.0;
  CHECK(run_curves_svg(wild, "t") == run_curves_svg(tame, "t"));

  CHECK(run_curves_svg(RunRecord{}, "empty").empty());
  testutil::TempDir dir;
  const auto written = emit_plots({fake_record(2, 1), RunRecord{}, fake_record(3, 2)}, dir.file(""));
  CHECK(written.size() == 2);
  for (const auto& p : written) CHECK(well_formed_xml(testutil::slurp(p)));
}

TEST_CASE("bench: small run reports every regime and a CE control") {
  auto cfg = small_config();
  BenchOptions opt;
  opt.steps = 10;
  opt.warmup = 2;
  const auto t = benchmark_cost(cfg, {0, 1}, opt);
  CHECK(t.rows.size() == 6);
  REQUIRE(t.overheads.size() == 2);
  for (const auto& row : t.rows) {
    CHECK(row.mean_step_ms > 0.0);
    CHECK(row.peak_bytes > 0);
    if (row.regime == Regime::Ce || row.regime == Regime::Convat) CHECK(row.encoder_backwards_per_step == 1.0);
    if (row.regime == Regime::Vat) CHECK(row.encoder_forwards_per_step + row.encoder_backwards_per_step >= 4.0);
  }
  for (const auto& o : t.overheads) CHECK(o.ce_control_ms > 0.0);
  CHECK(cost_table_csv(t).find("\n") != std::string::npos);
  CHECK(well_formed_xml(cost_svg(t, "cost")));
}
