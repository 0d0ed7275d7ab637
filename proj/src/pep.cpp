#include "ncmac/pep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "ncmac/errors.hpp"
#include "ncmac/metrics.hpp"
#include "ncmac/parallel.hpp"

namespace ncmac {

namespace {

namespace mp = boost::multiprecision;

constexpr std::uint64_t kBlock = 1 << 16;
constexpr int kMaxPoleOrder = 64;

bool gram_equal(const RVector& l) {
  for (Eigen::Index i = 0; i < l.size(); ++i)
    if (std::abs(l(i) - 1.0) > 1e-12) return false;
  return true;
}

template <class F>
class ResidueSum {
 public:
  ResidueSum(const PepSpectrum& sp, int N, long double c) : sp_(sp), N_(N), c_(c) {
    if (c >= 0) {
      sum_ = 1;
      scale_ = 1;
      for (std::size_t k = 0; k < sp.positive_count; ++k) add(residue(k));
    } else {
      for (std::size_t k = sp.positive_count; k < sp.lambda_hat.size(); ++k) add(-residue(k));
    }
  }

  double value() const { return static_cast<double>(sum_); }
  // magnitude below which the sum is rounding noise
  double floor(int digits) const { return static_cast<double>(scale_) * std::pow(10.0, -(digits - 4)); }

 private:
  void add(const F& t) {
    using std::abs;
    sum_ += t;
    if (abs(t) > scale_) scale_ = abs(t);
  }

  F residue(std::size_t k) const {
    using std::exp;
    using std::pow;
    const std::size_t L = sp_.lambda_hat.size();
    const F lk = sp_.lambda_hat[k];
    const int m = sp_.multiplicity[k] * N_;
    const F p = F(-1) / lk;
    F h0 = exp(p * c_) / (p * pow(lk, m));
    std::vector<F> shift;  // p + a_l
    std::vector<int> ml;
    for (std::size_t l = 0; l < L; ++l) {
      if (l == k) continue;
      const F ll = sp_.lambda_hat[l];
      h0 /= pow(F(1) - ll / lk, sp_.multiplicity[l] * N_);
      shift.push_back(p + F(1) / ll);
      ml.push_back(sp_.multiplicity[l] * N_);
    }
    // Taylor coefficients of ln h around the pole
    std::vector<F> phi(m + 1, F(0));
    for (int j = 1; j <= m; ++j) {
      F s = F(1) / pow(p, j);
      for (std::size_t l = 0; l < shift.size(); ++l) s += F(ml[l]) / pow(shift[l], j);
      phi[j] = ((j % 2 == 0) ? F(1) : F(-1)) / j * s;
    }
    phi[1] += F(c_);
    std::vector<F> h(m, F(0));
    h[0] = h0;
    for (int n = 0; n + 1 < m; ++n) {
      F s = 0;
      for (int j = 0; j <= n; ++j) s += F(j + 1) * phi[j + 1] * h[n - j];
      h[n + 1] = s / (n + 1);
    }
    return h[m - 1];
  }

  const PepSpectrum& sp_;
  int N_;
  long double c_;
  F sum_ = 0;
  F scale_ = 0;
};

}  // namespace

PepSpectrum pep_spectrum(const RVector& lambdas, double merge_tol, double zero_tol) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    const double h = lambdas(i) - 1.0;
    if (std::abs(h) > zero_tol) v.push_back(h);
  }
  std::sort(v.begin(), v.end(), [](double a, double b) { return a > b; });
  PepSpectrum s;
  std::vector<double> pos_val, neg_val;
  std::vector<int> pos_mul, neg_mul;
  for (double h : v) {
    auto& vals = h > 0 ? pos_val : neg_val;
    auto& muls = h > 0 ? pos_mul : neg_mul;
    if (!vals.empty() && std::abs(vals.back() - h) < merge_tol * std::max(1.0, std::abs(vals.back()))) {
      // merged pole: keep the multiplicity-weighted mean
      const int m = muls.back();
      vals.back() = (vals.back() * m + h) / (m + 1);
      ++muls.back();
    } else {
      vals.push_back(h);
      muls.push_back(1);
    }
  }
  // negatives are appended descending as well
  s.lambda_hat = pos_val;
  s.multiplicity = pos_mul;
  s.positive_count = pos_val.size();
  s.lambda_hat.insert(s.lambda_hat.end(), neg_val.begin(), neg_val.end());
  s.multiplicity.insert(s.multiplicity.end(), neg_mul.begin(), neg_mul.end());
  return s;
}

PepResult pep_monte_carlo_spectrum(const RVector& lambdas, int N, std::uint64_t trials, std::uint64_t seed) {
  if (trials < 1) throw InvalidInput("trials must be at least 1");
  if (N < 1) throw InvalidInput("N must be at least 1");
  PepResult r;
  r.method = "mc";
  r.trials = trials;
  if (gram_equal(lambdas)) {
    r.value = 1.0;
    r.diagnostics.push_back("non-identifiable pair");
    return r;
  }
  double thr = 0.0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) thr += std::log(lambdas(i));
  thr *= N;
  const std::uint64_t blocks = (trials + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> hits(blocks, 0);
  parallel_for(blocks, [&](std::size_t b) {
    Rng rng = Rng::stream(seed, b);
    std::gamma_distribution<double> g(static_cast<double>(N), 1.0);
    const std::uint64_t n = std::min<std::uint64_t>(kBlock, trials - b * kBlock);
    std::uint64_t h = 0;
    for (std::uint64_t t = 0; t < n; ++t) {
      double z = 0.0;
      for (Eigen::Index i = 0; i < lambdas.size(); ++i) z += (lambdas(i) - 1.0) * g(rng.engine());
      if (z <= thr) ++h;
    }
    hits[b] = h;
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  r.value = static_cast<double>(total) / static_cast<double>(trials);
  r.std_error = std::sqrt(r.value * (1.0 - r.value) / static_cast<double>(trials));
  return r;
}

PepResult pep_monte_carlo(const CMatrix& x, const CMatrix& xp, int N, std::uint64_t trials, Rng& rng) {
  const std::uint64_t seed = rng.engine()();
  return pep_monte_carlo_spectrum(gamma_spectrum(x, xp).lambdas, N, trials, seed);
}

PepResult pep_closed_form_spectrum(const RVector& lambdas, int N) {
  if (N < 1) throw InvalidInput("N must be at least 1");
  const PepSpectrum sp = pep_spectrum(lambdas);
  if (sp.lambda_hat.empty()) throw InvalidInput("non-identifiable pair: closed form undefined");
  for (int m : sp.multiplicity)
    if (m * N > kMaxPoleOrder) throw Unsupported("pole order above 64; use the Monte Carlo estimator");

  long double c = 0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) c += std::log(static_cast<long double>(lambdas(i)));
  c *= N;

  PepResult r;
  r.method = "closed";
  // The residue sum cancels down to the PEP; raise the precision until the
  // result clears the rounding floor of the largest term.
  ResidueSum<long double> sum(sp, N, c);
  double value = sum.value(), floor = sum.floor(std::numeric_limits<long double>::digits10);
  if (std::abs(value) <= floor) {
    ResidueSum<mp::cpp_bin_float_50> s50(sp, N, c);
    value = s50.value(), floor = s50.floor(50);
  }
  if (std::abs(value) <= floor) {
    ResidueSum<mp::number<mp::cpp_bin_float<150>>> s150(sp, N, c);
    value = s150.value(), floor = s150.floor(150);
  }
  if (std::abs(value) <= floor) {
    ResidueSum<mp::number<mp::cpp_bin_float<400>>> s400(sp, N, c);
    value = s400.value(), floor = s400.floor(400);
    if (std::abs(value) <= floor) r.diagnostics.push_back("residue sum below working precision");
  }
  double v = value;
  const double excess = std::max(-v, v - 1.0);
  if (excess > 0.0) {
    if (excess > 1e-8) {
      r.clamped = true;
      std::ostringstream os;
      os << "result clamped to [0,1], excess " << excess;
      r.diagnostics.push_back(os.str());
    }
    v = std::clamp(v, 0.0, 1.0);
  }
  r.value = v;
  return r;
}

PepResult pep_closed_form(const CMatrix& x, const CMatrix& xp, int N) {
  return pep_closed_form_spectrum(gamma_spectrum(x, xp).lambdas, N);
}

double pep_chernoff(const CMatrix& x, const CMatrix& xp, int N, double s) {
  return std::exp(-N * metric_J(x, xp, s));
}

std::pair<double, double> exponent_bounds(const CMatrix& x, const CMatrix& xp) {
  const double b = metric_b(x, xp);
  const double T = static_cast<double>(x.rows());
  return {0.5 * b - T * std::log(2.0), b + T};
}

}  // namespace ncmac
