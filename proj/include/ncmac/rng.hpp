#pragma once

#include <cstdint>
#include <random>

#include "ncmac/types.hpp"

namespace ncmac {

// Explicit random stream. Independent streams are derived from a master seed
// and a stream id, so parallel work can be reproduced at any thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(mix(seed)) {}

  static Rng stream(std::uint64_t master, std::uint64_t id);
  static Rng stream(std::uint64_t master, std::uint64_t id, std::uint64_t sub);

  std::mt19937_64& engine() { return engine_; }

  double uniform();
  double normal();
  // standard circularly symmetric complex Gaussian CN(0,1)
  cd complex_normal();
  CMatrix complex_gaussian(int rows, int cols);
  double gamma(double shape);
  std::uint64_t below(std::uint64_t n);

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::mt19937_64 engine_;
};

// T x M matrix with orthonormal columns, isotropically distributed
CMatrix random_orthonormal(int T, int M, Rng& rng);
// random T x T unitary (Haar)
CMatrix random_unitary(int T, Rng& rng);

}  // namespace ncmac
