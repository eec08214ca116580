#pragma once

#include <cstddef>
#include <string>

#include "convat/textdata/corpus.hpp"

namespace convat::textdata {

// File parsers. Each maps class labels to contiguous 0-based indices in the
// dataset's canonical order and throws ParseError (with a 1-based line number)
// or LabelError on bad input. Empty files yield an empty corpus.

/// `COARSE:fine question text` per line; six coarse classes.
TextCorpus parse_trec(const std::string& path);
/// `"class","title","description"` with 1-based class in [1,4].
TextCorpus parse_agnews_csv(const std::string& path);
/// `"class","title","description"` with 1-based class in [1,14].
TextCorpus parse_dbpedia_csv(const std::string& path);
/// `sentence<TAB>label` with label in {0,1}; a header line is skipped.
TextCorpus parse_sst2_tsv(const std::string& path);
/// `sentence<TAB>label` with label in [0, num_classes).
TextCorpus parse_labeled_tsv(const std::string& path, std::size_t num_classes);

TextCorpus parse_dataset(const std::string& path, DatasetFormat format, std::size_t num_classes = 0);

/// Writes `corpus` in its own format, using current labels.
void write_dataset(const TextCorpus& corpus, const std::string& path);

/// Splits one CSV record into fields (RFC 4180 quoting, "" escapes).
std::vector<std::string> split_csv_record(std::string_view record);

}  // namespace convat::textdata
