#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>

#include "../support/tempdir.hpp"
#include "convat/netcore/errors.hpp"
#include "convat/noise/transition.hpp"
#include "convat/textdata/vocab.hpp"

using namespace convat;
using namespace convat::noise;

namespace {

void check_row_stochastic(const TransitionMatrix& m) {
  REQUIRE(m.phi.rows() == m.num_classes);
  REQUIRE(m.phi.cols() == m.num_classes);
  for (std::size_t a = 0; a < m.num_classes; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < m.num_classes; ++b) {
      CHECK(m.phi(a, b) >= 0.0);
      CHECK(m.phi(a, b) <= 1.0);
      s += m.phi(a, b);
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

textdata::TextCorpus text_corpus(std::size_t n, std::size_t k) {
  textdata::TextCorpus c;
  c.num_classes = k;
  for (std::size_t i = 0; i < n; ++i) {
    c.examples.push_back({{"tok" + std::to_string(i % 7), "x"}, i % k, {}});
  }
  return c;
}

}  // namespace

TEST_CASE("uniform matrix examples") {
  const auto m = uniform_matrix(4, 0.3);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) CHECK(m.phi(a, b) == doctest::Approx(a == b ? 0.7 : 0.1).epsilon(1e-12));
  }
  const auto id = uniform_matrix(5, 0.0);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) CHECK(id.phi(a, b) == (a == b ? 1.0 : 0.0));
  }
  const auto swap = uniform_matrix(2, 1.0);
  CHECK(swap.phi == Tensor2{{0.0, 1.0}, {1.0, 0.0}});

  CHECK_THROWS_AS(uniform_matrix(4, -0.1), InvalidInputError);
  CHECK_THROWS_AS(uniform_matrix(4, 1.5), InvalidInputError);
  CHECK_THROWS_AS(uniform_matrix(1, 0.1), InvalidInputError);
}

TEST_CASE("random matrix examples") {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto id = random_matrix(4, 0.0, seed);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) CHECK(id.phi(a, b) == (a == b ? 1.0 : 0.0));
    }
  }
  CHECK(random_matrix(4, 0.5, 7).phi == random_matrix(4, 0.5, 7).phi);
  CHECK_FALSE(random_matrix(4, 0.5, 7).phi == random_matrix(4, 0.5, 8).phi);
  CHECK_THROWS_AS(random_matrix(4, 1.0, 7), InvalidInputError);
}

TEST_CASE("every constructed matrix is row-stochastic with the right diagonal") {
  for (std::size_t k = 2; k <= 14; ++k) {
    for (int step = 0; step <= 9; ++step) {
      const double rate = 0.1 * step;
      const auto u = uniform_matrix(k, rate);
      const auto r = random_matrix(k, rate, 1000 + k * 10 + step);
      check_row_stochastic(u);
      check_row_stochastic(r);
      for (std::size_t a = 0; a < k; ++a) {
        CHECK(std::abs(u.phi(a, a) - (1.0 - rate)) <= 1e-9);
        CHECK(std::abs(r.phi(a, a) - (1.0 - rate)) <= 1e-9);
      }
    }
  }
}

TEST_CASE("custom matrix validation") {
  const auto m = custom_matrix(Tensor2{{0.9, 0.1}, {0.3, 0.7}});
  CHECK(m.kind == NoiseKind::Custom);
  CHECK(m.noise_rate == doctest::Approx(0.2));
  CHECK_THROWS(custom_matrix(Tensor2{{0.9, 0.2}, {0.3, 0.7}}));
  CHECK_THROWS(custom_matrix(Tensor2{{1.1, -0.1}, {0.3, 0.7}}));
  CHECK_THROWS(custom_matrix(Tensor2(2, 3, 0.5)));
}

TEST_CASE("matrix file round trip") {
  testutil::TempDir dir;
  const auto m = random_matrix(5, 0.4, 3);
  write_matrix(m, dir.file("phi.txt"));
  const auto back = read_matrix(dir.file("phi.txt"));
  CHECK(back.num_classes == 5);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) CHECK(back.phi(a, b) == m.phi(a, b));
  }
  CHECK_THROWS(read_matrix(dir.write("bad.txt", "2\n0.5 0.5\n0.5\n")));
}

TEST_CASE("corrupt_labels examples") {
  std::vector<std::size_t> labels(500);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 4;

  auto [same, audit0] = corrupt_labels(labels, uniform_matrix(4, 0.0), 11);
  CHECK(same == labels);
  CHECK(audit0.flip_fraction == 0.0);

  std::vector<std::size_t> binary(300);
  for (std::size_t i = 0; i < binary.size(); ++i) binary[i] = i % 2;
  auto [flipped, audit1] = corrupt_labels(binary, uniform_matrix(2, 1.0), 11);
  for (std::size_t i = 0; i < binary.size(); ++i) CHECK(flipped[i] == 1 - binary[i]);
  CHECK(audit1.flip_fraction == 1.0);

  CHECK_THROWS_AS(corrupt_labels(text_corpus(10, 3), uniform_matrix(4, 0.2), 1), InvalidInputError);
}

TEST_CASE("flip fraction at 100k labels, uniform 0.3") {
  std::vector<std::size_t> labels(100000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 4;
  const auto [noisy, audit] = corrupt_labels(labels, uniform_matrix(4, 0.3), 2024);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) flips += noisy[i] != labels[i];
  CHECK(std::abs(static_cast<double>(flips) / 1e5 - 0.3) <= 0.01);
  CHECK(audit.flip_fraction == static_cast<double>(flips) / 1e5);

  std::size_t sum = 0;
  for (const auto& row : audit.counts) sum = std::accumulate(row.begin(), row.end(), sum);
  CHECK(sum == audit.total);
  CHECK(audit.total == labels.size());
}

TEST_CASE("empirical flip matrix lies within 3 sigma of phi") {
  const std::size_t k = 3, per_class = 12000;
  std::vector<std::size_t> labels(k * per_class);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % k;
  for (const auto& phi : {uniform_matrix(k, 0.45), random_matrix(k, 0.6, 5)}) {
    const auto [noisy, audit] = corrupt_labels(labels, phi, 77);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) {
        const double p = phi.phi(a, b);
        const double emp = static_cast<double>(audit.counts[a][b]) / per_class;
        CHECK(std::abs(emp - p) <= 3.0 * std::sqrt(p * (1 - p) / per_class) + 1e-12);
      }
    }
  }
}

TEST_CASE("corruption keeps tokens, leaves the input alone, and is seed-determined") {
  const auto clean = text_corpus(400, 4);
  const auto phi = uniform_matrix(4, 0.5);
  const auto [noisy, audit] = corrupt_labels(clean, phi, 9);
  REQUIRE(noisy.examples.size() == clean.examples.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < clean.examples.size(); ++i) {
    CHECK(noisy.examples[i].tokens == clean.examples[i].tokens);
    CHECK(clean.examples[i].label == i % 4);
    changed += noisy.examples[i].label != clean.examples[i].label;
  }
  CHECK(changed > 0);
  CHECK(corrupt_labels(clean, phi, 9).first.examples[17].label == noisy.examples[17].label);

  auto vocab = std::make_shared<const textdata::Vocabulary>(textdata::build_vocab(clean));
  const auto indexed = textdata::index_corpus(clean, vocab);
  const auto [noisy_ids, audit_ids] = corrupt_labels(indexed, phi, 9);
  for (std::size_t i = 0; i < indexed.size(); ++i) {
    CHECK(noisy_ids.examples[i].token_ids == indexed.examples[i].token_ids);
    CHECK(noisy_ids.examples[i].label == noisy.examples[i].label);
  }
}

TEST_CASE("test split is refused") {
  auto test = text_corpus(20, 2);
  test.split = textdata::Split::Test;
  CHECK_THROWS_AS(corrupt_labels(test, uniform_matrix(2, 0.2), 1), ContractViolation);
  auto vocab = std::make_shared<const textdata::Vocabulary>(textdata::build_vocab(test));
  const auto indexed = textdata::index_corpus(test, vocab);
  CHECK_THROWS_AS(corrupt_labels(indexed, uniform_matrix(2, 0.2), 1), ContractViolation);
}

TEST_CASE("audit CSV layout") {
  testutil::TempDir dir;
  std::vector<std::size_t> labels = {0, 1, 1, 0};
  const auto [noisy, audit] = corrupt_labels(labels, uniform_matrix(2, 0.0), 3);
  write_audit_csv(audit, dir.file("audit.csv"));
  CHECK(testutil::slurp(dir.file("audit.csv")) ==
        "true_label,recorded_label,count\n0,0,2\n0,1,0\n1,0,0\n1,1,2\n");
}
