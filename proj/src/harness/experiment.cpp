#include "convat/harness/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "convat/harness/plots.hpp"
#include "convat/harness/synthetic.hpp"
#include "convat/model/optimizer.hpp"
#include "convat/netcore/memstat.hpp"
#include "convat/netcore/rng.hpp"
#include "convat/regularizers/convat.hpp"
#include "convat/textdata/batching.hpp"
#include "convat/textdata/parsers.hpp"
#include "convat/textdata/vocab.hpp"

namespace convat::harness {
namespace {

// Stream tags for derive_seed, so each consumer of randomness is independent.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kPerturbStream = 3;
constexpr std::uint64_t kNoiseStream = 4;
constexpr std::uint64_t kPretrainedStream = 5;
// Held-out splits do not depend on the run seed, so every seed sees the same data.
constexpr std::uint64_t kHoldoutSeed = 0x686f6c646f7574ULL;
constexpr double kHoldoutFraction = 0.10;

std::uint64_t noise_base(const RunConfig& cfg) {
  return cfg.noise_seed != 0 ? cfg.noise_seed : derive_seed(cfg.seed, {kNoiseStream});
}

struct TextSplits {
  textdata::TextCorpus train, dev, test;
};

textdata::TextCorpus take(const textdata::TextCorpus& src, const std::vector<std::size_t>& idx,
                          std::size_t lo, std::size_t hi, textdata::Split split) {
  textdata::TextCorpus out = src;
  out.examples.clear();
  out.split = split;
  for (std::size_t i = lo; i < hi; ++i) out.examples.push_back(src.examples[idx[i]]);
  return out;
}

TextSplits load_text_splits(const RunConfig& cfg) {
  if (cfg.format == textdata::DatasetFormat::Synthetic) {
    auto s = make_synthetic_corpus(cfg.synthetic);
    return {std::move(s.train), std::move(s.dev), std::move(s.test)};
  }
  auto full = textdata::parse_dataset(cfg.dataset, cfg.format, cfg.num_classes);
  TextSplits out;
  const bool need_dev = cfg.dev_path.empty();
  const bool need_test = cfg.test_path.empty();
  if (need_dev || need_test) {
    std::vector<std::size_t> idx(full.examples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(kHoldoutSeed);
    for (std::size_t j = idx.size(); j > 1; --j) std::swap(idx[j - 1], idx[rng.below(j)]);
    const auto n = idx.size();
    const auto part = static_cast<std::size_t>(std::floor(static_cast<double>(n) * kHoldoutFraction));
    std::size_t pos = 0;
    if (need_test) {
      out.test = take(full, idx, pos, pos + part, textdata::Split::Test);
      pos += part;
    }
    if (need_dev) {
      out.dev = take(full, idx, pos, pos + part, textdata::Split::Dev);
      pos += part;
    }
    out.train = take(full, idx, pos, n, textdata::Split::Train);
  } else {
    out.train = std::move(full);
  }
  if (!need_dev) {
    out.dev = textdata::parse_dataset(cfg.dev_path, cfg.format, cfg.num_classes);
    out.dev.split = textdata::Split::Dev;
  }
  if (!need_test) {
    out.test = textdata::parse_dataset(cfg.test_path, cfg.format, cfg.num_classes);
    out.test.split = textdata::Split::Test;
  }
  if (out.train.examples.empty()) throw DataError("training split is empty");
  if (out.dev.examples.empty()) throw DataError("dev split is empty");
  if (out.test.examples.empty()) throw DataError("test split is empty");
  if (out.dev.num_classes != out.train.num_classes || out.test.num_classes != out.train.num_classes) {
    throw LabelError("splits disagree on the number of classes");
  }
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

bool grads_finite(model::ParamGrads& g) {
  for (auto view : model::tensor_views(g)) {
    for (double x : view) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void dump_diagnostic(const RunConfig& cfg, std::size_t epoch, std::size_t batch_index,
                     const textdata::Batch& batch, const reg::LossResult& loss) {
  std::ostringstream os;
  os << "epoch " << epoch << "\nbatch " << batch_index << "\nce " << loss.ce << "\ncls_mean "
     << loss.cls_mean << "\ntotal " << loss.total << "\nexamples";
  for (std::size_t i : batch.example_indices) os << ' ' << i;
  os << '\n';
  std::fputs(os.str().c_str(), stderr);
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_file_atomic((std::filesystem::path(cfg.out_dir) / "diagnostic.txt").string(), os.str());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void persist(const RunConfig& cfg, const PreparedData& data, const RunRecord& record,
             const std::vector<double>& wall_ms) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  auto path = [&](const char* name) { return (dir / name).string(); };
  auto via_tmp = [&](const char* name, auto&& writer) {
    const auto final_path = path(name);
    writer(final_path + ".tmp");
    fs::rename(final_path + ".tmp", final_path);
  };

  write_file_atomic(path("metrics.csv"), metrics_csv(record));
  via_tmp("best.ckpt", [&](const std::string& p) { model::save_checkpoint(record.best_params, p); });
  via_tmp("vocab.txt", [&](const std::string& p) { data.vocab->save(p); });
  via_tmp("phi.txt", [&](const std::string& p) { noise::write_matrix(data.phi, p); });
  via_tmp("audit_train.csv", [&](const std::string& p) { noise::write_audit_csv(data.train_audit, p); });
  via_tmp("audit_dev.csv", [&](const std::string& p) { noise::write_audit_csv(data.dev_audit, p); });
  const auto svg = run_curves_svg(record, std::string(regime_name(cfg.regime)) + " accuracy");
  if (!svg.empty()) write_file_atomic(path("curves.svg"), svg);

  nlohmann::json m;
  m["config"] = nlohmann::json::parse(to_json(cfg));
  m["created_utc"] = utc_timestamp();
  m["epoch_wall_ms"] = wall_ms;
  m["chosen_epoch"] = record.chosen_epoch;
  m["best_dev_acc"] = record.best_dev_acc;
  m["final_test_acc"] = record.final_test_acc;
  m["train_size"] = data.train.size();
  m["dev_size"] = data.dev.size();
  m["test_size"] = data.test.size();
  m["train_flip_fraction"] = data.train_audit.flip_fraction;
  m["dev_flip_fraction"] = data.dev_audit.flip_fraction;
  write_file_atomic(path("manifest.json"), m.dump(2) + "\n");
}

}  // namespace

noise::TransitionMatrix make_transition(const RunConfig& cfg, std::size_t num_classes) {
  if (cfg.noise == "uniform") return noise::uniform_matrix(num_classes, cfg.noise_rate);
  if (cfg.noise == "random") {
    return noise::random_matrix(num_classes, cfg.noise_rate, derive_seed(noise_base(cfg), {2}));
  }
  if (cfg.noise.rfind("custom:", 0) == 0) {
    auto m = noise::read_matrix(cfg.noise.substr(7));
    if (m.num_classes != num_classes) {
      throw LabelError("custom transition matrix is " + std::to_string(m.num_classes) + "x" +
                       std::to_string(m.num_classes) + " but the data has " +
                       std::to_string(num_classes) + " classes");
    }
    return m;
  }
  throw ConfigError("unknown noise kind '" + cfg.noise + "'");
}

PreparedData prepare_data(const RunConfig& cfg) {
  cfg.validate();
  auto text = load_text_splits(cfg);
  auto vocab = std::make_shared<const textdata::Vocabulary>(textdata::build_vocab(text.train, cfg.min_freq));

  PreparedData out;
  out.vocab = vocab;
  out.phi = make_transition(cfg, text.train.num_classes);
  const auto clean_train = textdata::index_corpus(text.train, vocab);
  const auto clean_dev = textdata::index_corpus(text.dev, vocab);
  out.test = textdata::index_corpus(text.test, vocab);
  const auto base = noise_base(cfg);
  std::tie(out.train, out.train_audit) = noise::corrupt_labels(clean_train, out.phi, derive_seed(base, {0}));
  std::tie(out.dev, out.dev_audit) = noise::corrupt_labels(clean_dev, out.phi, derive_seed(base, {1}));
  if (!cfg.embeddings_path.empty()) {
    out.pretrained = textdata::load_pretrained_vectors(cfg.embeddings_path, *vocab,
                                                       derive_seed(cfg.seed, {kPretrainedStream}));
  }
  return out;
}

RunRecord run_experiment(const RunConfig& cfg) { return run_experiment(cfg, prepare_data(cfg)); }

RunRecord run_experiment(const RunConfig& cfg, const PreparedData& data) {
  cfg.validate();
  const auto test_labels_before = data.test.labels();

  model::ModelConfig mcfg;
  mcfg.vocab_size = data.vocab->size();
  mcfg.embed_dim = data.pretrained ? data.pretrained->weights.cols() : cfg.embed_dim;
  mcfg.windows = cfg.windows;
  mcfg.filters = cfg.filters;
  mcfg.depth = cfg.depth;
  mcfg.num_classes = data.train.num_classes;

  auto params = model::init_params(mcfg, derive_seed(cfg.seed, {kInitStream}), data.pretrained);
  model::Optimizer opt(cfg.optimizer, params);
  const std::size_t pad_to = params.max_window();

  RunRecord record;
  std::vector<double> wall_ms;
  std::size_t since_best = 0;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    memstat::reset_peak();

    const auto batches = textdata::make_batches(data.train, cfg.batch_size, pad_to,
                                                derive_seed(cfg.seed, {kShuffleStream, epoch}));
    double loss_sum = 0.0;
    double cls_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& batch = batches[b];
      const auto caches = model::encode(params, batch);
      const std::uint64_t pseed = derive_seed(cfg.seed, {kPerturbStream, epoch, b});
      reg::LossResult loss;
      switch (cfg.regime) {
        case Regime::Ce: loss = reg::ce_loss(params, caches, batch.labels); break;
        case Regime::Convat: loss = reg::convat_loss(params, caches, batch.labels, cfg.convat, pseed); break;
        case Regime::Vat: loss = reg::vat_loss(params, caches, batch.labels, cfg.convat, pseed); break;
      }
      if (!std::isfinite(loss.total) || !grads_finite(loss.grads)) {
        dump_diagnostic(cfg, epoch, b, batch, loss);
        throw NumericFailure(epoch, b, std::isfinite(loss.total) ? "non-finite gradient" : "loss " + fmt(loss.total));
      }
      opt.step(params, loss.grads);
      const auto n = static_cast<double>(batch.size());
      loss_sum += loss.total * n;
      cls_sum += loss.cls_mean * n;
      seen += batch.size();
    }

    EpochRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(seen);
    row.cls_mean = cls_sum / static_cast<double>(seen);
    row.train_acc = model::accuracy(params, data.train);
    row.dev_acc = model::accuracy(params, data.dev);
    row.test_acc = model::accuracy(params, data.test);
    row.peak_bytes = memstat::peak_transient_bytes();
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    wall_ms.push_back(ms);
    row.epoch_wall_ms = cfg.wall_clock_metrics ? ms : 0.0;
    record.epochs.push_back(row);

    if (!have_best || row.dev_acc > record.best_dev_acc) {
      have_best = true;
      record.best_dev_acc = row.dev_acc;
      record.chosen_epoch = epoch;
      record.final_test_acc = row.test_acc;
      record.best_params = params;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  if (data.test.labels() != test_labels_before) throw ContractViolation("test labels changed during a run");
  if (!cfg.out_dir.empty()) persist(cfg, data, record, wall_ms);
  return record;
}

std::string metrics_csv(const RunRecord& record) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : record.epochs) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.8f,%.8f,%.3f,%lld\n", r.epoch, r.train_acc,
                  r.dev_acc, r.test_acc, r.train_loss, r.cls_mean, r.epoch_wall_ms,
                  static_cast<long long>(r.peak_bytes));
    out += buf;
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << contents;
    if (!out) throw DataError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace convat::harness
