#include "convat/textdata/batching.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"

namespace convat::textdata {
namespace {

std::vector<Batch> batches_from_order(const LabeledCorpus& corpus,
                                      const std::vector<std::size_t>& order,
                                      std::size_t batch_size, std::size_t pad_to_min) {
  if (batch_size == 0) throw InvalidInputError("batch_size must be >= 1");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    b.length = pad_to_min;
    for (std::size_t i = start; i < end; ++i) {
      b.length = std::max(b.length, corpus.examples[order[i]].token_ids.size());
    }
    for (std::size_t i = start; i < end; ++i) {
      const auto& ex = corpus.examples[order[i]];
      std::vector<int> ids = ex.token_ids;
      ids.resize(b.length, kPadId);
      b.example_indices.push_back(order[i]);
      b.token_ids.push_back(std::move(ids));
      b.labels.push_back(ex.label);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::vector<Batch> make_batches(const LabeledCorpus& corpus, std::size_t batch_size,
                                std::size_t pad_to_min, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return batches_from_order(corpus, order, batch_size, pad_to_min);
}

std::vector<Batch> make_ordered_batches(const LabeledCorpus& corpus, std::size_t batch_size,
                                        std::size_t pad_to_min) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return batches_from_order(corpus, order, batch_size, pad_to_min);
}

EmbeddingTable random_embeddings(std::size_t vocab_size, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table{Tensor2(vocab_size, dim)};
  Rng rng(seed);
  for (double& v : table.weights.flat()) v = rng.uniform(-0.25, 0.25);
  if (vocab_size > 0) std::fill(table.weights.row(kPadId).begin(), table.weights.row(kPadId).end(), 0.0);
  return table;
}

EmbeddingTable load_pretrained_vectors(const std::string& path, const Vocabulary& vocab,
                                       std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vectors file " + path);

  std::vector<std::pair<int, std::vector<double>>> rows;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    std::vector<double> values;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      }
    }
    if (values.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": token without vector");
    }
    if (dim == 0) dim = values.size();
    if (values.size() != dim) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, found " + std::to_string(values.size()));
    }
    if (vocab.contains(token)) rows.emplace_back(vocab.id_of(token), std::move(values));
  }
  if (dim == 0) throw FormatError(path + ": no vectors found");

  EmbeddingTable table = random_embeddings(vocab.size(), dim, seed);
  for (auto& [id, values] : rows) {
    std::copy(values.begin(), values.end(), table.weights.row(static_cast<std::size_t>(id)).begin());
  }
  std::fill(table.weights.row(kPadId).begin(), table.weights.row(kPadId).end(), 0.0);
  return table;
}

}  // namespace convat::textdata
