#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "convat/harness/config.hpp"
#include "convat/model/cnn.hpp"
#include "convat/netcore/errors.hpp"
#include "convat/noise/transition.hpp"
#include "convat/textdata/corpus.hpp"

namespace convat::harness {

inline constexpr const char* kMetricsHeader =
    "epoch,train_acc,dev_acc,test_acc,train_loss,cls_mean,epoch_wall_ms,peak_bytes";

struct EpochRow {
  std::size_t epoch = 0;
  double train_acc = 0.0;  // against the (noisy) training labels
  double dev_acc = 0.0;    // against the (noisy) dev labels
  double test_acc = 0.0;   // clean
  double train_loss = 0.0;
  double cls_mean = 0.0;
  double epoch_wall_ms = 0.0;
  std::int64_t peak_bytes = 0;
};

struct RunRecord {
  std::vector<EpochRow> epochs;
  std::size_t chosen_epoch = 0;  // 1-based, selected by dev accuracy
  double best_dev_acc = 0.0;
  double final_test_acc = 0.0;   // test accuracy of the chosen checkpoint
  model::ModelParams best_params;
};

/// Thrown when a loss or gradient turns non-finite. Exit code 4.
class NumericFailure : public NumericError {
 public:
  NumericFailure(std::size_t epoch, std::size_t batch, const std::string& detail)
      : NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                     std::to_string(batch) + ": " + detail),
        epoch_(epoch),
        batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct PreparedData {
  textdata::LabeledCorpus train;
  textdata::LabeledCorpus dev;
  textdata::LabeledCorpus test;
  std::shared_ptr<const textdata::Vocabulary> vocab;
  noise::TransitionMatrix phi;
  noise::NoiseAudit train_audit;
  noise::NoiseAudit dev_audit;
  std::optional<textdata::EmbeddingTable> pretrained;
};

/// Loads or generates the splits, builds the vocabulary on train, and corrupts
/// train and dev labels with distinct seeds derived from cfg.seed. Test is never corrupted.
PreparedData prepare_data(const RunConfig& cfg);

noise::TransitionMatrix make_transition(const RunConfig& cfg, std::size_t num_classes);

/// Trains one configuration, recording every epoch. When cfg.out_dir is set,
/// writes metrics.csv, best.ckpt, vocab.txt, phi.txt, audit CSVs, curves.svg
/// and a manifest.json holding wall-clock data.
RunRecord run_experiment(const RunConfig& cfg);
RunRecord run_experiment(const RunConfig& cfg, const PreparedData& data);

/// Metrics CSV text (header + one line per epoch).
std::string metrics_csv(const RunRecord& record);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace convat::harness
