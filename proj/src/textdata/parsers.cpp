#include "convat/textdata/parsers.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <optional>

#include "convat/netcore/errors.hpp"

namespace convat::textdata {
namespace {

constexpr std::array<const char*, 6> kTrecCoarse = {"ABBR", "DESC", "ENTY", "HUM", "LOC", "NUM"};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path);
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<long> parse_int(std::string_view s) {
  s = trim(s);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

bool quotes_balanced(std::string_view s) {
  return std::count(s.begin(), s.end(), '"') % 2 == 0;
}

TextCorpus parse_class_csv(const std::string& path, DatasetFormat format, std::size_t classes) {
  TextCorpus corpus;
  corpus.format = format;
  corpus.num_classes = classes;
  for (std::size_t k = 1; k <= classes; ++k) corpus.label_names.push_back(std::to_string(k));

  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    const std::size_t record_line = line_no;
    std::string record = line;
    // Quoted fields may span lines.
    while (!quotes_balanced(record)) {
      if (!std::getline(in, line)) throw ParseError(path, record_line, "unterminated quoted field");
      ++line_no;
      strip_cr(line);
      record += '\n';
      record += line;
    }
    if (blank(record)) continue;
    auto fields = split_csv_record(record);
    if (fields.size() != 3) {
      throw ParseError(path, record_line,
                       "expected 3 fields, found " + std::to_string(fields.size()));
    }
    auto cls = parse_int(fields[0]);
    if (!cls) throw ParseError(path, record_line, "non-numeric class index '" + fields[0] + "'");
    if (*cls < 1 || static_cast<std::size_t>(*cls) > classes) {
      throw LabelError(path + ":" + std::to_string(record_line) + ": class index " +
                       std::to_string(*cls) + " outside [1," + std::to_string(classes) + "]");
    }
    TextExample ex;
    ex.label = static_cast<std::size_t>(*cls - 1);
    ex.tokens = tokenize(fields[1] + " " + fields[2]);
    ex.fields = {fields[1], fields[2]};
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

TextCorpus parse_tsv_impl(const std::string& path, std::size_t classes, DatasetFormat format) {
  TextCorpus corpus;
  corpus.format = format;
  corpus.num_classes = classes;
  for (std::size_t k = 0; k < classes; ++k) corpus.label_names.push_back(std::to_string(k));

  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  bool first_record = true;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(path, line_no, "missing tab separator");
    std::string_view sentence(line.data(), tab);
    std::string_view label_field(line.data() + tab + 1, line.size() - tab - 1);
    auto label = parse_int(label_field);
    if (!label) {
      if (first_record) {
        first_record = false;
        continue;  // header
      }
      throw ParseError(path, line_no, "non-numeric label '" + std::string(label_field) + "'");
    }
    first_record = false;
    if (*label < 0 || static_cast<std::size_t>(*label) >= classes) {
      throw LabelError(path + ":" + std::to_string(line_no) + ": label " + std::to_string(*label) +
                       " outside [0," + std::to_string(classes) + ")");
    }
    TextExample ex;
    ex.label = static_cast<std::size_t>(*label);
    ex.tokens = tokenize(sentence);
    ex.fields = {std::string(sentence)};
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<std::string> split_csv_record(std::string_view record) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const char c = record[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < record.size() && record[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && !was_quoted && trim(cur).empty()) {
      cur.clear();
      in_quotes = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else if (!(was_quoted && (c == ' ' || c == '\t'))) {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

TextCorpus parse_trec(const std::string& path) {
  TextCorpus corpus;
  corpus.format = DatasetFormat::Trec;
  corpus.num_classes = kTrecCoarse.size();
  corpus.label_names.assign(kTrecCoarse.begin(), kTrecCoarse.end());

  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;
    const auto space = line.find(' ');
    const auto colon = line.find(':');
    if (colon == std::string::npos || (space != std::string::npos && colon > space)) {
      throw ParseError(path, line_no, "expected LABEL:fine prefix");
    }
    const std::string coarse = line.substr(0, colon);
    const std::string fine =
        line.substr(colon + 1, space == std::string::npos ? std::string::npos : space - colon - 1);
    if (fine.empty()) throw ParseError(path, line_no, "empty fine label");
    auto it = std::find(kTrecCoarse.begin(), kTrecCoarse.end(), coarse);
    if (it == kTrecCoarse.end()) {
      throw LabelError(path + ":" + std::to_string(line_no) + ": unknown TREC label '" + coarse + "'");
    }
    TextExample ex;
    ex.label = static_cast<std::size_t>(it - kTrecCoarse.begin());
    const std::string text = space == std::string::npos ? std::string() : line.substr(space + 1);
    ex.tokens = tokenize(text);
    ex.fields = {fine, text};
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

TextCorpus parse_agnews_csv(const std::string& path) {
  return parse_class_csv(path, DatasetFormat::AgNews, 4);
}

TextCorpus parse_dbpedia_csv(const std::string& path) {
  return parse_class_csv(path, DatasetFormat::DbPedia, 14);
}

TextCorpus parse_sst2_tsv(const std::string& path) {
  return parse_tsv_impl(path, 2, DatasetFormat::Sst2);
}

TextCorpus parse_labeled_tsv(const std::string& path, std::size_t num_classes) {
  if (num_classes < 2) throw InvalidInputError("tsv datasets need num_classes >= 2");
  return parse_tsv_impl(path, num_classes, DatasetFormat::Tsv);
}

TextCorpus parse_dataset(const std::string& path, DatasetFormat format, std::size_t num_classes) {
  switch (format) {
    case DatasetFormat::Trec: return parse_trec(path);
    case DatasetFormat::AgNews: return parse_agnews_csv(path);
    case DatasetFormat::Sst2: return parse_sst2_tsv(path);
    case DatasetFormat::DbPedia: return parse_dbpedia_csv(path);
    case DatasetFormat::Tsv: return parse_labeled_tsv(path, num_classes);
    case DatasetFormat::Synthetic: break;
  }
  throw InvalidInputError("synthetic corpora are generated, not parsed");
}

void write_dataset(const TextCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset to " + path);
  auto text_of = [](const TextExample& ex) {
    if (!ex.fields.empty()) return ex.fields.back();
    std::string joined;
    for (const auto& t : ex.tokens) {
      if (!joined.empty()) joined += ' ';
      joined += t;
    }
    return joined;
  };
  for (const auto& ex : corpus.examples) {
    switch (corpus.format) {
      case DatasetFormat::Trec: {
        const std::string fine = ex.fields.size() == 2 ? ex.fields[0] : "other";
        out << corpus.label_names.at(ex.label) << ':' << fine << ' ' << text_of(ex) << '\n';
        break;
      }
      case DatasetFormat::AgNews:
      case DatasetFormat::DbPedia: {
        const std::string title = ex.fields.size() == 2 ? ex.fields[0] : "";
        out << csv_quote(std::to_string(ex.label + 1)) << ',' << csv_quote(title) << ','
            << csv_quote(text_of(ex)) << '\n';
        break;
      }
      case DatasetFormat::Sst2:
      case DatasetFormat::Tsv:
      case DatasetFormat::Synthetic:
        out << text_of(ex) << '\t' << ex.label << '\n';
        break;
    }
  }
  if (!out) throw DataError("failed writing dataset to " + path);
}

}  // namespace convat::textdata
