#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace convat {

/// Portable 64-bit generator: xoshiro256** seeded through splitmix64.
///
/// Seeding: the four state words are successive outputs of splitmix64 started
/// at the user seed. uniform() takes the top 53 bits of next() and scales by
/// 2^-53, giving a double in [0, 1). below(n) uses rejection on the top bits so
/// every language reproducing this stream gets the same integers. normal() is
/// Box-Muller over two uniform() draws (the second sample is discarded).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();
  double uniform(double lo, double hi);
  std::uint64_t below(std::uint64_t n);
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes a base seed with a list of stream coordinates (epoch, batch, split...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts);

}  // namespace convat
