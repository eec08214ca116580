#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "convat/textdata/vocab.hpp"

namespace convat::textdata {

enum class Split { Train, Dev, Test };
std::string_view split_name(Split s);

enum class DatasetFormat { Trec, AgNews, Sst2, DbPedia, Tsv, Synthetic };
DatasetFormat parse_format(std::string_view name);
std::string_view format_name(DatasetFormat f);

/// One parsed record before vocabulary indexing. `fields` keeps the source
/// text fields verbatim so a corrupted copy can be written back in the same format.
struct TextExample {
  std::vector<std::string> tokens;
  std::size_t label = 0;
  std::vector<std::string> fields;
};

struct TextCorpus {
  std::vector<TextExample> examples;
  std::size_t num_classes = 0;
  std::vector<std::string> label_names;
  DatasetFormat format = DatasetFormat::Tsv;
  Split split = Split::Train;
};

struct LabeledExample {
  std::vector<int> token_ids;
  std::size_t label = 0;
};

struct LabeledCorpus {
  std::vector<LabeledExample> examples;
  std::size_t num_classes = 0;
  std::shared_ptr<const Vocabulary> vocab;
  Split split = Split::Train;

  std::size_t size() const noexcept { return examples.size(); }
  std::vector<std::size_t> labels() const;
};

/// Maps tokens through `vocab`. Empty token sequences become a single UNK.
LabeledCorpus index_corpus(const TextCorpus& text, std::shared_ptr<const Vocabulary> vocab);

/// Throws LabelError / DimensionError if any label or id is out of range.
void validate(const LabeledCorpus& corpus);

/// Lowercase, split punctuation into standalone tokens, split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace convat::textdata
