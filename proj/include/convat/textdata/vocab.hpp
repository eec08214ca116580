#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace convat::textdata {

struct TextCorpus;

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

class Vocabulary {
 public:
  /// Holds only PAD and UNK.
  Vocabulary();
  /// Rebuilds from an id-ordered token list; entries 0 and 1 must be PAD, UNK.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  /// UNK for tokens not in the vocabulary.
  int id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Tokens with count >= min_freq, ordered by descending count then lexicographically.
Vocabulary build_vocab(const TextCorpus& train, std::size_t min_freq = 1);

}  // namespace convat::textdata
