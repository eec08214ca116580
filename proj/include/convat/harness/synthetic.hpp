#pragma once

#include <string>

#include "convat/harness/config.hpp"
#include "convat/textdata/corpus.hpp"

namespace convat::harness {

inline constexpr std::size_t kSignalTokensPerClass = 5;

struct SyntheticSplits {
  textdata::TextCorpus train;
  textdata::TextCorpus dev;
  textdata::TextCorpus test;
};

/// Class k owns signal tokens `s{k}_{0..4}`; the remaining vocab_size - 5K ids
/// are distractors `w{j}`. Each example draws its class uniformly, then 2-4
/// signal tokens of that class and 6-10 distractors, in a shuffled order.
/// A bag-of-signal-tokens rule classifies every example correctly.
SyntheticSplits make_synthetic_corpus(const SyntheticSpec& spec);

/// Writes train.tsv, dev.tsv and test.tsv (`text<TAB>label`) into `dir`.
void write_synthetic_corpus(const SyntheticSplits& splits, const std::string& dir);

}  // namespace convat::harness
