#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ncmac/metrics.hpp"
#include "ncmac/model.hpp"
#include "ncmac/types.hpp"

namespace ncmac {

// Two-user SIMO quantities. All vectors are unit-norm T x 1; P1 is the power
// of user 1 and theta = P2 / P1.
struct SimoTuple {
  CVector x1, x1p, x2;     // user-1 pair and interfering user-2 symbol
  CVector xh1, xh2, xh2p;  // interfering user-1 symbol and user-2 pair
};

std::pair<double, double> delta_funcs(double theta, const SimoTuple& t, double P1, int T);

struct CubicCoefficients {
  double a = 0, b = 0, c = 0, d = 0, Delta = 0, e1 = 0, e2 = 0;
};

CubicCoefficients cubic_coefficients(const SimoTuple& t, double P1, int T);

struct ThetaHat {
  double theta = 0.0;
  double delta = 0.0;  // common value of delta_1 and delta_2 at theta
  bool fallback = false;
  std::string diagnostic;
};

ThetaHat theta_hat_cubic(const SimoTuple& t, double P1, int T);
// root of delta_1 - delta_2 by bracketing and bisection
double theta_hat_bisection(const SimoTuple& t, double P1, int T);

struct PowerSearchResult {
  double theta = 1.0;  // P2 / P1 when K = 2
  std::vector<double> powers;
  double value = 0.0;  // metric at `powers`
  std::string method;
  int evaluations = 0;
  bool flat = false;
  std::vector<std::string> diagnostics;
};

// K = 2, M = 1. Symbols are normalized internally; user 1 transmits at P1.
// value is min(d_1, d_2) at the returned theta.
PowerSearchResult theta_star_enumerate(const JointConstellation& c, double P1);

// Golden-section search over theta in [0,1] with user 1 at full power P, and
// over 1/theta in [0,1] with user 2 at full power; returns the better one.
PowerSearchResult theta_golden(const MetricKind& kind, const JointConstellation& c, double P, double tol = 1e-4);

struct NelderMeadOptions {
  double tol = 1e-4;
  int max_evals = 400;
  double initial_step = 0.25;
};

PowerSearchResult powers_neldermead(const MetricKind& kind, const JointConstellation& c, double P,
                                    const NelderMeadOptions& options = {});

}  // namespace ncmac
