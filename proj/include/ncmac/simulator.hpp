#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncmac/model.hpp"
#include "ncmac/pep.hpp"

namespace ncmac {

struct SimPlan {
  const JointConstellation* constellation = nullptr;
  int N = 1;
  std::vector<double> snr_db;
  std::uint64_t max_trials = 100000;
  std::uint64_t target_errors = 100;  // 0 disables early stopping
  std::uint64_t seed = 1;
};

struct SimPoint {
  double snr_db = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t errors = 0;
  double ser = 0.0;
  double std_error = 0.0;
};

struct SimResult {
  std::vector<SimPoint> points;
  std::vector<std::string> diagnostics;
};

// Trials run in fixed blocks with their own derived streams; early stopping is
// decided block by block in index order, so the result does not depend on the
// thread count.
SimResult simulate_ser(const SimPlan& plan);

// Full-channel estimate of P[LL(Y, x) <= LL(Y, x')] given x was sent
PepResult simulate_pep_empirical(const CMatrix& x, const CMatrix& xp, int N, std::uint64_t trials,
                                 std::uint64_t seed);

}  // namespace ncmac
