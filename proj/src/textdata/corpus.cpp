#include "convat/textdata/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "convat/netcore/errors.hpp"

namespace convat::textdata {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

DatasetFormat parse_format(std::string_view name) {
  if (name == "trec") return DatasetFormat::Trec;
  if (name == "agnews") return DatasetFormat::AgNews;
  if (name == "sst2") return DatasetFormat::Sst2;
  if (name == "dbpedia") return DatasetFormat::DbPedia;
  if (name == "tsv") return DatasetFormat::Tsv;
  if (name == "synthetic") return DatasetFormat::Synthetic;
  throw InvalidInputError("unknown dataset format '" + std::string(name) + "'");
}

std::string_view format_name(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::Trec: return "trec";
    case DatasetFormat::AgNews: return "agnews";
    case DatasetFormat::Sst2: return "sst2";
    case DatasetFormat::DbPedia: return "dbpedia";
    case DatasetFormat::Tsv: return "tsv";
    case DatasetFormat::Synthetic: return "synthetic";
  }
  return "tsv";
}

std::vector<std::size_t> LabeledCorpus::labels() const {
  std::vector<std::size_t> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (u < 128 && std::isspace(u)) {
      flush();
    } else if (u < 128 && std::ispunct(u)) {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      cur.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : ch);
    }
  }
  flush();
  return tokens;
}

LabeledCorpus index_corpus(const TextCorpus& text, std::shared_ptr<const Vocabulary> vocab) {
  LabeledCorpus out;
  out.num_classes = text.num_classes;
  out.split = text.split;
  out.examples.reserve(text.examples.size());
  for (const auto& ex : text.examples) {
    LabeledExample le;
    le.label = ex.label;
    le.token_ids.reserve(ex.tokens.size());
    for (const auto& tok : ex.tokens) le.token_ids.push_back(vocab->id_of(tok));
    if (le.token_ids.empty()) le.token_ids.push_back(kUnkId);
    out.examples.push_back(std::move(le));
  }
  out.vocab = std::move(vocab);
  return out;
}

void validate(const LabeledCorpus& corpus) {
  const std::size_t vsize = corpus.vocab ? corpus.vocab->size() : 0;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    const auto& ex = corpus.examples[i];
    if (ex.label >= corpus.num_classes) {
      throw LabelError("example " + std::to_string(i) + " has label " + std::to_string(ex.label) +
                       " outside [0," + std::to_string(corpus.num_classes) + ")");
    }
    if (ex.token_ids.empty()) throw DimensionError("example " + std::to_string(i) + " is empty");
    for (int id : ex.token_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= vsize) {
        throw DimensionError("example " + std::to_string(i) + " has token id " +
                             std::to_string(id) + " outside vocabulary of " + std::to_string(vsize));
      }
    }
  }
}

}  // namespace convat::textdata
