#include "convat/noise/transition.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "convat/netcore/errors.hpp"
#include "convat/netcore/rng.hpp"

namespace convat::noise {
namespace {

void check_rate(std::size_t k, double rate, bool allow_one) {
  if (k < 2) throw InvalidInputError("transition matrix needs K >= 2");
  if (!(rate >= 0.0) || rate > 1.0 || (!allow_one && rate >= 1.0)) {
    throw InvalidInputError("noise rate " + std::to_string(rate) + " out of range");
  }
}

// Test labels are never corrupted; the harness relies on this.
void refuse_test_split(textdata::Split split) {
  if (split == textdata::Split::Test) throw ContractViolation("label noise must not touch the test split");
}

void check_stochastic(const Tensor2& phi) {
  if (phi.rows() != phi.cols() || phi.rows() < 2) {
    throw InvalidInputError("transition matrix must be square with K >= 2, got " + phi.shape_string());
  }
  for (std::size_t a = 0; a < phi.rows(); ++a) {
    double sum = 0.0;
    for (double v : phi.row(a)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidInputError("transition matrix entry outside [0,1] in row " + std::to_string(a));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidInputError("transition matrix row " + std::to_string(a) + " sums to " +
                              std::to_string(sum));
    }
  }
}

}  // namespace

TransitionMatrix uniform_matrix(std::size_t num_classes, double noise_rate) {
  check_rate(num_classes, noise_rate, true);
  TransitionMatrix m{num_classes, Tensor2(num_classes, num_classes), noise_rate, NoiseKind::Uniform};
  const double off = noise_rate / static_cast<double>(num_classes - 1);
  for (std::size_t a = 0; a < num_classes; ++a) {
    for (std::size_t b = 0; b < num_classes; ++b) m.phi(a, b) = a == b ? 1.0 - noise_rate : off;
  }
  return m;
}

TransitionMatrix random_matrix(std::size_t num_classes, double noise_rate, std::uint64_t seed) {
  check_rate(num_classes, noise_rate, num_classes == 2);
  if (num_classes == 2) {
    // Only one off-diagonal cell per row, so the random split is forced.
    auto m = uniform_matrix(2, noise_rate);
    m.kind = NoiseKind::Random;
    return m;
  }
  TransitionMatrix m{num_classes, Tensor2(num_classes, num_classes), noise_rate, NoiseKind::Random};
  Rng rng(seed);
  std::vector<double> draws(num_classes - 1);
  for (std::size_t a = 0; a < num_classes; ++a) {
    double total = 0.0;
    for (double& d : draws) {
      d = rng.uniform();
      total += d;
    }
    if (total <= 0.0) {
      std::fill(draws.begin(), draws.end(), 1.0);
      total = static_cast<double>(draws.size());
    }
    std::size_t j = 0;
    for (std::size_t b = 0; b < num_classes; ++b) {
      m.phi(a, b) = a == b ? 1.0 - noise_rate : noise_rate * draws[j++] / total;
    }
  }
  return m;
}

TransitionMatrix custom_matrix(Tensor2 phi) {
  check_stochastic(phi);
  const std::size_t k = phi.rows();
  double off_mass = 0.0;
  for (std::size_t a = 0; a < k; ++a) off_mass += 1.0 - phi(a, a);
  return TransitionMatrix{k, std::move(phi), off_mass / static_cast<double>(k), NoiseKind::Custom};
}

TransitionMatrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open transition matrix file " + path);
  long k = 0;
  if (!(in >> k) || k < 2) throw FormatError(path + ": first line must be K >= 2");
  Tensor2 phi(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
  for (double& v : phi.flat()) {
    if (!(in >> v)) throw FormatError(path + ": expected " + std::to_string(k * k) + " entries");
  }
  std::string extra;
  if (in >> extra) throw FormatError(path + ": trailing data after matrix");
  try {
    return custom_matrix(std::move(phi));
  } catch (const InvalidInputError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_matrix(const TransitionMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write transition matrix to " + path);
  out << m.num_classes << '\n' << std::setprecision(17);
  for (std::size_t a = 0; a < m.num_classes; ++a) {
    for (std::size_t b = 0; b < m.num_classes; ++b) out << (b ? " " : "") << m.phi(a, b);
    out << '\n';
  }
}

std::pair<std::vector<std::size_t>, NoiseAudit> corrupt_labels(
    const std::vector<std::size_t>& labels, const TransitionMatrix& phi, std::uint64_t seed) {
  const std::size_t k = phi.num_classes;
  NoiseAudit audit;
  audit.counts.assign(k, std::vector<std::size_t>(k, 0));
  audit.total = labels.size();

  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  std::size_t flipped = 0;
  for (std::size_t y : labels) {
    if (y >= k) throw InvalidInputError("label " + std::to_string(y) + " outside transition matrix");
    const double u = rng.uniform();
    auto row = phi.phi.row(y);
    std::size_t recorded = k - 1;
    double cdf = 0.0;
    for (std::size_t b = 0; b < k; ++b) {
      cdf += row[b];
      if (u < cdf) {
        recorded = b;
        break;
      }
    }
    // Guard against cdf rounding to just below 1: land on the last nonzero cell.
    while (row[recorded] == 0.0 && recorded > 0) --recorded;
    ++audit.counts[y][recorded];
    if (recorded != y) ++flipped;
    out.push_back(recorded);
  }
  audit.flip_fraction = labels.empty() ? 0.0 : static_cast<double>(flipped) / labels.size();
  return {std::move(out), std::move(audit)};
}

std::pair<textdata::LabeledCorpus, NoiseAudit> corrupt_labels(const textdata::LabeledCorpus& corpus,
                                                              const TransitionMatrix& phi,
                                                              std::uint64_t seed) {
  refuse_test_split(corpus.split);
  if (corpus.num_classes != phi.num_classes) {
    throw InvalidInputError("corpus has " + std::to_string(corpus.num_classes) +
                            " classes but transition matrix has " + std::to_string(phi.num_classes));
  }
  auto [labels, audit] = corrupt_labels(corpus.labels(), phi, seed);
  textdata::LabeledCorpus out = corpus;
  for (std::size_t i = 0; i < labels.size(); ++i) out.examples[i].label = labels[i];
  return {std::move(out), std::move(audit)};
}

std::pair<textdata::TextCorpus, NoiseAudit> corrupt_labels(const textdata::TextCorpus& corpus,
                                                           const TransitionMatrix& phi,
                                                           std::uint64_t seed) {
  refuse_test_split(corpus.split);
  if (corpus.num_classes != phi.num_classes) {
    throw InvalidInputError("corpus has " + std::to_string(corpus.num_classes) +
                            " classes but transition matrix has " + std::to_string(phi.num_classes));
  }
  std::vector<std::size_t> labels;
  labels.reserve(corpus.examples.size());
  for (const auto& ex : corpus.examples) labels.push_back(ex.label);
  auto [noisy, audit] = corrupt_labels(labels, phi, seed);
  textdata::TextCorpus out = corpus;
  for (std::size_t i = 0; i < noisy.size(); ++i) out.examples[i].label = noisy[i];
  return {std::move(out), std::move(audit)};
}

void write_audit_csv(const NoiseAudit& audit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write audit to " + path);
  out << "true_label,recorded_label,count\n";
  for (std::size_t a = 0; a < audit.counts.size(); ++a) {
    for (std::size_t b = 0; b < audit.counts[a].size(); ++b) {
      out << a << ',' << b << ',' << audit.counts[a][b] << '\n';
    }
  }
}

}  // namespace convat::noise
