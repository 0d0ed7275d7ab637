#include "ncmac/rng.hpp"

#include <cmath>

namespace ncmac {

std::uint64_t Rng::mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::stream(std::uint64_t master, std::uint64_t id) {
  return Rng(mix(master) ^ mix(id + 0x632be59bd9b4e019ULL));
}

Rng Rng::stream(std::uint64_t master, std::uint64_t id, std::uint64_t sub) {
  return Rng(mix(mix(master) ^ mix(id + 0x632be59bd9b4e019ULL)) ^ mix(sub + 0x2545f4914f6cdd1dULL));
}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

cd Rng::complex_normal() {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(engine_);
  const double im = n(engine_);
  return {re, im};
}

CMatrix Rng::complex_gaussian(int rows, int cols) {
  CMatrix m(rows, cols);
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = n(engine_);
      const double im = n(engine_);
      m(i, j) = cd(re, im);
    }
  return m;
}

double Rng::gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

std::uint64_t Rng::below(std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

CMatrix random_orthonormal(int T, int M, Rng& rng) {
  CMatrix g = rng.complex_gaussian(T, M);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ() * CMatrix::Identity(T, M);
  // fix the phase ambiguity so the distribution is Haar
  const CMatrix& r = qr.matrixQR();
  for (int j = 0; j < M; ++j) {
    const cd d = r(j, j);
    if (std::abs(d) > 0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

CMatrix random_unitary(int T, Rng& rng) { return random_orthonormal(T, T, rng); }

}  // namespace ncmac
