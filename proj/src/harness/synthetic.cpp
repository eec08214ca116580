#include "convat/harness/synthetic.hpp"

#include <cmath>
#include <filesystem>

#include "convat/harness/experiment.hpp"
#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"
#include "convat/textdata/parsers.hpp"

namespace convat::harness {
namespace {

textdata::TextCorpus empty_split(const SyntheticSpec& spec, textdata::Split split) {
  textdata::TextCorpus c;
  c.num_classes = spec.num_classes;
  c.format = textdata::DatasetFormat::Synthetic;
  c.split = split;
  for (std::size_t k = 0; k < spec.num_classes; ++k) c.label_names.push_back(std::to_string(k));
  return c;
}

}  // namespace

SyntheticSplits make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw InvalidInputError("synthetic corpus needs K >= 2");
  if (spec.vocab_size < 10 * spec.num_classes) {
    throw InvalidInputError("synthetic corpus needs vocab_size >= 10*K");
  }
  const std::size_t signal_total = kSignalTokensPerClass * spec.num_classes;
  const std::size_t distractors = spec.vocab_size - signal_total;

  Rng rng(spec.seed);
  std::vector<textdata::TextExample> all;
  all.reserve(spec.num_examples);
  for (std::size_t i = 0; i < spec.num_examples; ++i) {
    textdata::TextExample ex;
    ex.label = static_cast<std::size_t>(rng.below(spec.num_classes));
    const std::size_t n_signal = 2 + static_cast<std::size_t>(rng.below(3));
    const std::size_t n_noise = 6 + static_cast<std::size_t>(rng.below(5));
    for (std::size_t s = 0; s < n_signal; ++s) {
      ex.tokens.push_back("s" + std::to_string(ex.label) + "_" +
                          std::to_string(rng.below(kSignalTokensPerClass)));
    }
    for (std::size_t s = 0; s < n_noise; ++s) ex.tokens.push_back("w" + std::to_string(rng.below(distractors)));
    for (std::size_t j = ex.tokens.size(); j > 1; --j) {
      std::swap(ex.tokens[j - 1], ex.tokens[static_cast<std::size_t>(rng.below(j))]);
    }
    std::string text;
    for (const auto& t : ex.tokens) text += (text.empty() ? "" : " ") + t;
    ex.fields = {std::move(text)};
    all.push_back(std::move(ex));
  }

  const auto n = static_cast<double>(spec.num_examples);
  const auto n_train = static_cast<std::size_t>(std::llround(n * spec.train_fraction));
  const auto n_dev = std::min(spec.num_examples - n_train,
                              static_cast<std::size_t>(std::llround(n * spec.dev_fraction)));

  SyntheticSplits out{empty_split(spec, textdata::Split::Train), empty_split(spec, textdata::Split::Dev),
                      empty_split(spec, textdata::Split::Test)};
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_dev ? out.dev : out.test);
    dst.examples.push_back(std::move(all[i]));
  }
  return out;
}

void write_synthetic_corpus(const SyntheticSplits& splits, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto* c : {&splits.train, &splits.dev, &splits.test}) {
    textdata::TextCorpus copy = *c;
    copy.format = textdata::DatasetFormat::Tsv;
    const auto path = (std::filesystem::path(dir) / (std::string(textdata::split_name(c->split)) + ".tsv")).string();
    textdata::write_dataset(copy, path + ".tmp");
    std::filesystem::rename(path + ".tmp", path);
  }
}

}  // namespace convat::harness
