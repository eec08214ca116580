#include <doctest.h>

#include <algorithm>
#include <map>

#include "../support/tempdir.hpp"
#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"
#include "convat/textdata/batching.hpp"
#include "convat/textdata/parsers.hpp"
#include "convat/textdata/vocab.hpp"

using namespace convat;
using namespace convat::textdata;

namespace {

TextCorpus corpus_of(const std::vector<std::string>& lines, std::size_t k = 2) {
  TextCorpus c;
  c.num_classes = k;
  for (std::size_t i = 0; i < lines.size(); ++i) c.examples.push_back({tokenize(lines[i]), i % k, {lines[i]}});
  return c;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("How did serfdom develop?") == std::vector<std::string>{"how", "did", "serfdom", "develop", "?"});
  CHECK(tokenize("  a,b  ") == std::vector<std::string>{"a", ",", "b"});
  CHECK(tokenize("").empty());
}

TEST_CASE("TREC line parses to the coarse label") {
  testutil::TempDir dir;
  const auto path = dir.write("trec.txt", "DESC:manner How did serfdom develop ?\nNUM:date When was it ?\n");
  const auto c = parse_trec(path);
  REQUIRE(c.examples.size() == 2);
  CHECK(c.num_classes == 6);
  CHECK(c.label_names[c.examples[0].label] == "DESC");
  CHECK(c.examples[0].tokens == std::vector<std::string>{"how", "did", "serfdom", "develop", "?"});
  CHECK(c.label_names[c.examples[1].label] == "NUM");

  dir.write("bad.txt", "DESC:manner ok\nnot a label line\n");
  try {
    parse_trec(dir.file("bad.txt"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  dir.write("unknown.txt", "FOO:bar text\n");
  CHECK_THROWS_AS(parse_trec(dir.file("unknown.txt")), LabelError);
}

TEST_CASE("AG-News and DBpedia CSV use 1-based classes") {
  testutil::TempDir dir;
  const auto path = dir.write("ag.csv", "\"3\",\"Title\",\"Body, with comma\"\n\"1\",\"Multi\",\"line\nbody \"\"quoted\"\"\"\n");
  const auto c = parse_agnews_csv(path);
  REQUIRE(c.examples.size() == 2);
  CHECK(c.num_classes == 4);
  CHECK(c.examples[0].label == 2);
  CHECK(c.examples[1].label == 0);
  CHECK(std::count(c.examples[1].tokens.begin(), c.examples[1].tokens.end(), "quoted") == 1);

  dir.write("ag_bad.csv", "\"5\",\"t\",\"b\"\n");
  CHECK_THROWS_AS(parse_agnews_csv(dir.file("ag_bad.csv")), LabelError);
  dir.write("db.csv", "14,\"Title\",\"desc\"\n");
  CHECK(parse_dbpedia_csv(dir.file("db.csv")).examples[0].label == 13);
}

TEST_CASE("SST-2 skips a header; empty files parse to empty corpora") {
  testutil::TempDir dir;
  const auto c = parse_sst2_tsv(dir.write("sst.tsv", "sentence\tlabel\ngood film\t1\nbad\t0\n"));
  REQUIRE(c.examples.size() == 2);
  CHECK(c.examples[0].label == 1);
  CHECK(c.num_classes == 2);
  for (auto fmt : {DatasetFormat::Trec, DatasetFormat::AgNews, DatasetFormat::Sst2, DatasetFormat::DbPedia}) {
    CHECK(parse_dataset(dir.write("empty", ""), fmt).examples.empty());
  }
  CHECK_THROWS_AS(parse_sst2_tsv(dir.write("notab.tsv", "no tab here\n")), ParseError);
}

TEST_CASE("parser labels lie in [0, K) with the canonical class counts") {
  testutil::TempDir dir;
  const std::map<DatasetFormat, std::pair<std::string, std::size_t>> samples = {
      {DatasetFormat::Trec, {"ABBR:exp What is X ?\nLOC:city Where ?\nHUM:ind Who ?\nENTY:animal What ?\n", 6}},
      {DatasetFormat::AgNews, {"1,a,b\n4,c,d\n", 4}},
      {DatasetFormat::Sst2, {"x\t0\ny\t1\n", 2}},
      {DatasetFormat::DbPedia, {"1,a,b\n14,c,d\n7,e,f\n", 14}},
  };
  for (const auto& [fmt, sample] : samples) {
    const auto c = parse_dataset(dir.write("s", sample.first), fmt);
    CHECK(c.num_classes == sample.second);
    for (const auto& e : c.examples) CHECK(e.label < sample.second);
  }
}

TEST_CASE("write_dataset round-trips each format with current labels") {
  testutil::TempDir dir;
  auto trec = parse_trec(dir.write("t", "DESC:manner How did it go ?\nLOC:city Where is it ?\n"));
  trec.examples[0].label = 4;
  write_dataset(trec, dir.file("t2"));
  const auto back = parse_trec(dir.file("t2"));
  CHECK(back.examples[0].label == 4);
  CHECK(back.examples[0].tokens == trec.examples[0].tokens);

  auto ag = parse_agnews_csv(dir.write("a", "\"2\",\"T, x\",\"line1\nline2\"\n"));
  write_dataset(ag, dir.file("a2"));
  const auto ag2 = parse_agnews_csv(dir.file("a2"));
  CHECK(ag2.examples[0].label == 1);
  CHECK(ag2.examples[0].tokens == ag.examples[0].tokens);

  auto tsv = parse_labeled_tsv(dir.write("x", "a b\t2\nc\t0\n"), 3);
  write_dataset(tsv, dir.file("x2"));
  CHECK(parse_labeled_tsv(dir.file("x2"), 3).examples[0].label == 2);
}

TEST_CASE("vocabulary ordering and thresholds") {
  const auto c = corpus_of({"a a b"});
  const auto v = build_vocab(c, 1);
  CHECK(v.id_of("<pad>") == kPadId);
  CHECK(v.id_of("<unk>") == kUnkId);
  CHECK(v.id_of("a") == 2);
  CHECK(v.id_of("b") == 3);
  const auto v2 = build_vocab(c, 2);
  CHECK(v2.id_of("b") == kUnkId);
  CHECK(v2.size() == 3);
  CHECK(build_vocab(c, 1).tokens() == v.tokens());

  // bijection between list and map
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.id_of(v.token(i)) == static_cast<int>(i));

  testutil::TempDir dir;
  v.save(dir.file("vocab.txt"));
  CHECK(Vocabulary::load(dir.file("vocab.txt")).tokens() == v.tokens());
}

TEST_CASE("index_corpus maps unseen tokens to UNK and empty text to [UNK]") {
  auto train = corpus_of({"a b", "b c"});
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(train));
  auto test = corpus_of({"a zzz", ""});
  const auto lc = index_corpus(test, vocab);
  CHECK(lc.examples[0].token_ids[1] == kUnkId);
  CHECK(lc.examples[1].token_ids == std::vector<int>{kUnkId});
  validate(lc);
  auto broken = lc;
  broken.examples[0].label = 7;
  CHECK_THROWS_AS(validate(broken), LabelError);
}

TEST_CASE("pretrained vectors") {
  testutil::TempDir dir;
  auto c = corpus_of({"the cat"});
  const Vocabulary v = build_vocab(c);
  const auto t = load_pretrained_vectors(dir.write("vec.txt", "the 0.1 0.2\n<pad> 9 9\n"), v, 5);
  CHECK(t.weights.cols() == 2);
  CHECK(t.weights(v.id_of("the"), 0) == 0.1);
  CHECK(t.weights(v.id_of("the"), 1) == 0.2);
  CHECK(t.weights(kPadId, 0) == 0.0);
  CHECK(t.weights(kPadId, 1) == 0.0);
  // absent token keeps its seeded random row
  const auto rnd = random_embeddings(v.size(), 2, 5);
  const int cat = v.id_of("cat");
  CHECK(t.weights(cat, 0) == rnd.weights(cat, 0));
  CHECK(std::abs(t.weights(cat, 1)) < 0.25);
  CHECK_THROWS_AS(load_pretrained_vectors(dir.write("bad.txt", "the 0.1 0.2\ncat 0.3\n"), v, 5), FormatError);
}

TEST_CASE("random_embeddings: PAD is zero, others in (-0.25, 0.25)") {
  const auto t = random_embeddings(50, 8, 3);
  for (std::size_t j = 0; j < 8; ++j) CHECK(t.weights(kPadId, j) == 0.0);
  for (std::size_t i = 1; i < 50; ++i) {
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(t.weights(i, j)) < 0.25);
  }
}

TEST_CASE("batching examples") {
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(corpus_of({"a b c d e"})));
  const auto lc = index_corpus(corpus_of({"a", "a b", "c", "d e", "b"}), vocab);
  const auto batches = make_batches(lc, 2, 3, 1);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 2);
  CHECK(batches[1].size() == 2);
  CHECK(batches[2].size() == 1);
  for (const auto& b : batches) {
    CHECK(b.length == 3);
    for (const auto& ids : b.token_ids) CHECK(ids.size() == 3);
  }
  const auto again = make_batches(lc, 2, 3, 1);
  for (std::size_t i = 0; i < batches.size(); ++i) CHECK(batches[i].example_indices == again[i].example_indices);
  CHECK_THROWS_AS(make_batches(lc, 0, 3, 1), InvalidInputError);
}

TEST_CASE("batching round trip recovers every example exactly once") {
  Rng rng(4);
  std::vector<std::string> lines;
  for (int i = 0; i < 37; ++i) {
    std::string s;
    for (std::size_t t = 0; t <= rng.below(9); ++t) s += "w" + std::to_string(rng.below(6)) + " ";
    lines.push_back(s);
  }
  auto text = corpus_of(lines, 3);
  auto vocab = std::make_shared<const Vocabulary>(build_vocab(text));
  const auto lc = index_corpus(text, vocab);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<int> seen(lc.size(), 0);
    for (const auto& b : make_batches(lc, 1 + seed % 7, 2 + seed % 3, seed)) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        const auto idx = b.example_indices[j];
        ++seen[idx];
        const auto& orig = lc.examples[idx].token_ids;
        CHECK(b.labels[j] == lc.examples[idx].label);
        CHECK(std::equal(orig.begin(), orig.end(), b.token_ids[j].begin()));
        CHECK(std::all_of(b.token_ids[j].begin() + static_cast<long>(orig.size()), b.token_ids[j].end(),
                          [](int id) { return id == kPadId; }));
      }
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));
  }
}
