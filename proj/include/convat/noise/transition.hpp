#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "convat/netcore/tensor.hpp"
#include "convat/textdata/corpus.hpp"

namespace convat::noise {

enum class NoiseKind { Uniform, Random, Custom };

/// Row-stochastic K×K label-flip matrix; phi(a, b) = P(recorded b | true a).
struct TransitionMatrix {
  std::size_t num_classes = 0;
  Tensor2 phi;
  double noise_rate = 0.0;
  NoiseKind kind = NoiseKind::Custom;
};

/// Diagonal 1-rate, off-diagonal rate/(K-1).
TransitionMatrix uniform_matrix(std::size_t num_classes, double noise_rate);

/// Diagonal 1-rate; each row's off-diagonal mass is split in proportion to
/// K-1 uniform(0,1) draws, taken row by row (row a, columns b != a ascending).
TransitionMatrix random_matrix(std::size_t num_classes, double noise_rate, std::uint64_t seed);

/// Validates a user-supplied matrix. noise_rate is reported as the mean off-diagonal row mass.
TransitionMatrix custom_matrix(Tensor2 phi);

/// Text file: first line K, then K rows of K reals.
TransitionMatrix read_matrix(const std::string& path);
void write_matrix(const TransitionMatrix& m, const std::string& path);

struct NoiseAudit {
  std::vector<std::vector<std::size_t>> counts;  // [true][recorded]
  std::size_t total = 0;
  double flip_fraction = 0.0;
};

/// Resamples each label from its phi row using one Rng stream (one uniform()
/// per example, inverse CDF over the row). Token sequences are untouched.
std::pair<std::vector<std::size_t>, NoiseAudit> corrupt_labels(
    const std::vector<std::size_t>& labels, const TransitionMatrix& phi, std::uint64_t seed);

std::pair<textdata::LabeledCorpus, NoiseAudit> corrupt_labels(const textdata::LabeledCorpus& corpus,
                                                              const TransitionMatrix& phi,
                                                              std::uint64_t seed);

std::pair<textdata::TextCorpus, NoiseAudit> corrupt_labels(const textdata::TextCorpus& corpus,
                                                           const TransitionMatrix& phi,
                                                           std::uint64_t seed);

/// CSV `true_label,recorded_label,count`, one row per cell.
void write_audit_csv(const NoiseAudit& audit, const std::string& path);

}  // namespace convat::noise
