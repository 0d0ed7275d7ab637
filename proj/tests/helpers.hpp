#pragma once

#include <cmath>
#include <vector>

#include "ncmac/model.hpp"
#include "ncmac/rng.hpp"

namespace testing {

using namespace ncmac;

inline CMatrix e(int T, int i, double scale = 1.0) {
  CMatrix x = CMatrix::Zero(T, 1);
  x(i, 0) = scale;
  return x;
}

// USTM symbols scaled to power P
inline JointConstellation random_constellation(int T, const std::vector<int>& M, const std::vector<std::size_t>& sizes,
                                               double P, Rng& rng) {
  JointConstellation c;
  c.config.T = T;
  c.config.K = static_cast<int>(M.size());
  c.config.M = M;
  c.config.P = P;
  for (std::size_t k = 0; k < M.size(); ++k) {
    UserConstellation u;
    u.power = P;
    for (std::size_t n = 0; n < sizes[k]; ++n)
      u.symbols.push_back(std::sqrt(P * T / M[k]) * random_orthonormal(T, M[k], rng));
    c.users.push_back(std::move(u));
  }
  return c;
}

inline JointConstellation make_constellation(int T, const std::vector<std::vector<CMatrix>>& users) {
  JointConstellation c;
  c.config.T = T;
  c.config.K = static_cast<int>(users.size());
  c.config.M.clear();
  double pmax = 0.0;
  for (const auto& syms : users) {
    UserConstellation u;
    u.symbols = syms;
    u.power = u.average_power(T);
    pmax = std::max(pmax, u.power);
    c.config.M.push_back(static_cast<int>(syms.front().cols()));
    c.users.push_back(std::move(u));
  }
  c.config.P = pmax;
  return c;
}

inline CMatrix random_pd(int n, Rng& rng) {
  const CMatrix g = rng.complex_gaussian(n, n);
  return g * g.adjoint() + CMatrix::Identity(n, n);
}

}  // namespace testing
