#include "convat/textdata/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "convat/netcore/errors.hpp"
#include "convat/textdata/corpus.hpp"

namespace convat::textdata {

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw FormatError("vocabulary must start with " + std::string(kPadToken) + " and " +
                      std::string(kUnkToken));
  }
  for (auto& t : tokens) {
    if (ids_.count(t) != 0) throw FormatError("duplicate vocabulary token '" + t + "'");
    add(std::move(t));
  }
}

void Vocabulary::add(std::string token) {
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

int Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary to " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read vocabulary from " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocab(const TextCorpus& train, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : train.examples) {
    for (const auto& tok : ex.tokens) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq && tok != kPadToken && tok != kUnkToken) kept.emplace_back(tok, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

}  // namespace convat::textdata
