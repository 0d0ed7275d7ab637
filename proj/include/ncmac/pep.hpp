#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ncmac/rng.hpp"
#include "ncmac/types.hpp"

namespace ncmac {

// Distinct non-zero eigenvalues of Gamma - I with multiplicities, positive
// values first, each group sorted descending.
struct PepSpectrum {
  std::vector<double> lambda_hat;
  std::vector<int> multiplicity;
  std::size_t positive_count = 0;
};

PepSpectrum pep_spectrum(const RVector& lambdas, double merge_tol = 1e-9, double zero_tol = 1e-10);

struct PepResult {
  double value = 0.0;
  std::string method;
  std::uint64_t trials = 0;
  double std_error = 0.0;
  bool clamped = false;
  std::vector<std::string> diagnostics;
};

PepResult pep_monte_carlo(const CMatrix& x, const CMatrix& xp, int N, std::uint64_t trials, Rng& rng);
PepResult pep_monte_carlo_spectrum(const RVector& lambdas, int N, std::uint64_t trials, std::uint64_t seed);

// Throws InvalidInput for a Gram-equal pair and Unsupported when a pole order
// exceeds 64.
PepResult pep_closed_form(const CMatrix& x, const CMatrix& xp, int N);
PepResult pep_closed_form_spectrum(const RVector& lambdas, int N);

double pep_chernoff(const CMatrix& x, const CMatrix& xp, int N, double s);

// (b/2 - T ln 2, b + T)
std::pair<double, double> exponent_bounds(const CMatrix& x, const CMatrix& xp);

}  // namespace ncmac
