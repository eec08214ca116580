#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "convat/netcore/tensor.hpp"
#include "convat/textdata/corpus.hpp"

namespace convat::textdata {

struct Batch {
  std::vector<std::size_t> example_indices;  // into the source corpus
  std::vector<std::vector<int>> token_ids;   // all padded to `length`
  std::vector<std::size_t> labels;
  std::size_t length = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

/// Shuffles with `seed` (Fisher-Yates over Rng::below) and pads each batch with
/// PAD up to max(longest sequence in the batch, pad_to_min).
std::vector<Batch> make_batches(const LabeledCorpus& corpus, std::size_t batch_size,
                                std::size_t pad_to_min, std::uint64_t seed);

/// Same, in corpus order without shuffling (evaluation).
std::vector<Batch> make_ordered_batches(const LabeledCorpus& corpus, std::size_t batch_size,
                                        std::size_t pad_to_min);

struct EmbeddingTable {
  Tensor2 weights;  // |V| × d; row kPadId is zero
};

/// Every row uniform(-0.25, 0.25) drawn in id order from `seed`; PAD zeroed.
EmbeddingTable random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed);

/// Starts from random_embeddings(vocab.size(), d, seed) and overwrites rows for
/// tokens found in the `token v1 ... vd` file. d is taken from the first line.
EmbeddingTable load_pretrained_vectors(const std::string& path, const Vocabulary& vocab,
                                       std::uint64_t seed);

}  // namespace convat::textdata
