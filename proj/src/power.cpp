#include "ncmac/power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ncmac/errors.hpp"
#include "ncmac/optimizer.hpp"

namespace ncmac {

namespace {

double abs2(cd v) { return std::norm(v); }

// rho a^H (I + rho b b^H + rho theta c c^H)^{-1} a for unit vectors
double quad_closed(double rho, double theta, const CVector& a, const CVector& b, const CVector& c) {
  const cd ab = a.dot(b), bc = b.dot(c), ac = a.dot(c);
  const double e = 1.0 - abs2(ac) + rho * ((1.0 - abs2(ab)) * (1.0 - abs2(bc)) - abs2(ab * bc - ac));
  const double g = 1.0 + rho * (1.0 - abs2(bc));
  return rho * ((1.0 + rho * (1.0 - abs2(ab))) + rho * theta * e) / (1.0 + rho + rho * theta * g);
}

void check_tuple(const SimoTuple& t, int T) {
  for (const CVector* v : {&t.x1, &t.x1p, &t.x2, &t.xh1, &t.xh2, &t.xh2p})
    if (v->size() != T) throw DimensionMismatch("SIMO symbols must have length T");
}

std::pair<double, double> delta_closed(double theta, const SimoTuple& t, double rho) {
  return {quad_closed(rho, theta, t.x1, t.x1p, t.x2), theta * quad_closed(rho, theta, t.xh2, t.xh1, t.xh2p)};
}

}  // namespace

std::pair<double, double> delta_funcs(double theta, const SimoTuple& t, double P1, int T) {
  check_tuple(t, T);
  if (theta < 0.0) throw InvalidInput("theta must be non-negative");
  const double rho = P1 * T;
  const CMatrix I = CMatrix::Identity(T, T);
  const CMatrix A1 = I + rho * t.x1p * t.x1p.adjoint() + theta * rho * t.x2 * t.x2.adjoint();
  const CMatrix A2 = I + rho * t.xh1 * t.xh1.adjoint() + theta * rho * t.xh2p * t.xh2p.adjoint();
  const double d1 = rho * t.x1.dot(A1.llt().solve(t.x1)).real();
  const double d2 = theta * rho * t.xh2.dot(A2.llt().solve(t.xh2)).real();
  return {d1, d2};
}

CubicCoefficients cubic_coefficients(const SimoTuple& t, double P1, int T) {
  check_tuple(t, T);
  const double r = P1 * T;
  const double u11p = abs2(t.x1.dot(t.x1p));    // |x1^H x1'|^2
  const double u1p2 = abs2(t.x1p.dot(t.x2));    // |x1'^H x2|^2
  const double u12 = abs2(t.x1.dot(t.x2));      // |x1^H x2|^2
  const double v12 = abs2(t.xh1.dot(t.xh2));    // |xh1^H xh2|^2
  const double v12p = abs2(t.xh1.dot(t.xh2p));  // |xh1^H xh2'|^2
  const double v22p = abs2(t.xh2.dot(t.xh2p));  // |xh2^H xh2'|^2
  CubicCoefficients k;
  k.e1 = 1.0 - u12 + r * ((1.0 - u11p) * (1.0 - u1p2) - abs2(t.x1.dot(t.x1p) * t.x1p.dot(t.x2) - t.x1.dot(t.x2)));
  k.e2 = 1.0 - v22p +
         r * ((1.0 - v12) * (1.0 - v12p) - abs2(t.xh2.dot(t.xh1) * t.xh1.dot(t.xh2p) - t.xh2.dot(t.xh2p)));
  const double g1 = 1.0 + r * (1.0 - u1p2);
  const double h2 = 1.0 + r * (1.0 - v12);
  const double h2p = 1.0 + r * (1.0 - v12p);
  const double h1 = 1.0 + r * (1.0 - u11p);
  k.a = r * g1 * k.e2;
  k.b = (1.0 + r) * k.e2 + g1 * h2 - (r + r * r * (1.0 - v12p)) * k.e1;
  k.c = -(1.0 + r) * k.e1 - h2p * h1 + (1.0 + 1.0 / r) * h2;
  k.d = -(1.0 + 1.0 / r) * h1;
  k.Delta = k.b * k.b - 3.0 * k.a * k.c;
  return k;
}

double theta_hat_bisection(const SimoTuple& t, double P1, int T) {
  check_tuple(t, T);
  const double rho = P1 * T;
  auto diff = [&](double th) {
    const auto d = delta_closed(th, t, rho);
    return d.first - d.second;
  };
  double lo = 0.0, hi = 1.0;
  // delta_2 grows strictly, so doubling terminates
  for (int i = 0; i < 2000 && diff(hi) > 0.0; ++i) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 300 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (diff(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ThetaHat theta_hat_cubic(const SimoTuple& t, double P1, int T) {
  const CubicCoefficients k = cubic_coefficients(t, P1, T);
  const double rho = P1 * T;
  ThetaHat r;
  bool ok = k.a > 0.0 && k.Delta > 0.0;
  if (ok) {
    double arg = (9.0 * k.a * k.b * k.c - 2.0 * k.b * k.b * k.b - 27.0 * k.a * k.a * k.d) /
                 (2.0 * std::sqrt(k.Delta * k.Delta * k.Delta));
    if (std::abs(arg) > 1.0 + 1e-12) {
      ok = false;
    } else {
      arg = std::clamp(arg, -1.0, 1.0);
      r.theta = (2.0 * std::sqrt(k.Delta) * std::cos(std::acos(arg) / 3.0) - k.b) / (3.0 * k.a);
      const auto d = delta_closed(r.theta, t, rho);
      if (!(r.theta > 0.0) || std::abs(d.first - d.second) > 1e-8 * std::max(1.0, d.first)) {
        ok = false;
        r.diagnostic = "cubic root inaccurate; bisection used";
      }
    }
  } else {
    r.diagnostic = "non-positive discriminant; bisection used";
  }
  if (!ok) {
    if (r.diagnostic.empty()) r.diagnostic = "arccos argument out of range; bisection used";
    r.fallback = true;
    r.theta = theta_hat_bisection(t, P1, T);
  }
  r.delta = delta_closed(r.theta, t, rho).first;
  return r;
}

PowerSearchResult theta_star_enumerate(const JointConstellation& c, double P1) {
  if (c.config.K != 2 || c.config.M[0] != 1 || c.config.M[1] != 1)
    throw InvalidInput("power enumeration needs two single-antenna users");
  if (c.users[0].size() < 2 || c.users[1].size() < 2)
    throw InvalidInput("power enumeration needs at least two symbols per user");
  const int T = c.config.T;
  std::vector<CVector> u1, u2;
  for (const auto& x : c.users[0].symbols) u1.push_back(x.col(0) / x.norm());
  for (const auto& x : c.users[1].symbols) u2.push_back(x.col(0) / x.norm());
  const std::size_t n1 = u1.size(), n2 = u2.size();

  PowerSearchResult res;
  res.method = "cubic-enumeration";
  double best = std::numeric_limits<double>::infinity();
  int fallbacks = 0;
  SimoTuple t;
  // lexicographic order over (x1, x1', x2, xh1, xh2, xh2'); strict < keeps the first minimizer
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n1; ++b) {
      if (a == b) continue;
      for (std::size_t cc = 0; cc < n2; ++cc)
        for (std::size_t d = 0; d < n1; ++d)
          for (std::size_t e = 0; e < n2; ++e)
            for (std::size_t f = 0; f < n2; ++f) {
              if (e == f) continue;
              t.x1 = u1[a];
              t.x1p = u1[b];
              t.x2 = u2[cc];
              t.xh1 = u1[d];
              t.xh2 = u2[e];
              t.xh2p = u2[f];
              const ThetaHat h = theta_hat_cubic(t, P1, T);
              ++res.evaluations;
              if (h.fallback) ++fallbacks;
              if (h.delta < best) {
                best = h.delta;
                res.theta = h.theta;
              }
            }
    }
  if (fallbacks > 0) res.diagnostics.push_back(std::to_string(fallbacks) + " tuples needed the bisection fallback");
  res.powers = {P1, res.theta * P1};
  const JointConstellation scaled = with_powers(c, res.powers);
  const double d1 = metric_d_k(scaled, 0), d2 = metric_d_k(scaled, 1);
  res.value = std::min(d1, d2);
  if (std::abs(d1 - d2) > 1e-6 * std::max(d1, d2)) {
    std::ostringstream os;
    os << "d_1 and d_2 differ at the returned theta: " << d1 << " vs " << d2;
    res.diagnostics.push_back(os.str());
  }
  return res;
}

namespace {

double score(const MetricKind& kind, const JointConstellation& c, const std::vector<double>& powers) {
  const double v = evaluate_metric(kind, with_powers(c, powers)).value;
  if (std::isnan(v)) return -std::numeric_limits<double>::infinity();
  return oriented_metric(kind, v);
}

struct GoldenRun {
  double t = 0.5;
  double best = 0.0;
  int evals = 0;
  bool flat = false;
};

template <class F>
GoldenRun golden_max(F&& f, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  GoldenRun g;
  g.evals = 2;
  double lo = std::min(f1, f2), hi = std::max(f1, f2);
  double bx = f1 >= f2 ? x1 : x2, bf = std::max(f1, f2);
  while (b - a > tol) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
      if (f1 > bf) bf = f1, bx = x1;
      lo = std::min(lo, f1);
      hi = std::max(hi, f1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
      if (f2 > bf) bf = f2, bx = x2;
      lo = std::min(lo, f2);
      hi = std::max(hi, f2);
    }
    ++g.evals;
  }
  g.flat = hi - lo <= 1e-12 * std::max(1.0, std::abs(hi));
  g.t = g.flat ? 0.5 : bx;
  g.best = g.flat ? f(0.5) : bf;
  return g;
}

}  // namespace

PowerSearchResult theta_golden(const MetricKind& kind, const JointConstellation& c, double P, double tol) {
  if (c.config.K != 2) throw InvalidInput("golden-section power search needs K = 2");
  if (!(tol > 0.0)) throw InvalidInput("tolerance must be positive");
  const GoldenRun g1 = golden_max([&](double t) { return score(kind, c, {P, t * P}); }, tol);
  const GoldenRun g2 = golden_max([&](double t) { return score(kind, c, {t * P, P}); }, tol);
  PowerSearchResult res;
  res.method = "golden";
  res.evaluations = g1.evals + g2.evals;
  if (g2.best > g1.best) {
    res.powers = {g2.t * P, P};
    res.theta = 1.0 / g2.t;
    res.flat = g2.flat;
  } else {
    res.powers = {P, g1.t * P};
    res.theta = g1.t;
    res.flat = g1.flat;
  }
  if (res.flat) res.diagnostics.push_back("metric is flat in theta; midpoint returned");
  res.value = evaluate_metric(kind, with_powers(c, res.powers)).value;
  return res;
}

namespace {

struct NmOutcome {
  std::vector<double> x;
  double f = 0.0;
  int evals = 0;
  double diameter = 0.0;
};

// minimizes f over [0,1]^n with clamping
template <class F>
NmOutcome nelder_mead(F&& f, std::vector<double> start, const NelderMeadOptions& o, int budget) {
  const std::size_t n = start.size();
  auto clampv = [](std::vector<double> v) {
    for (auto& a : v) a = std::clamp(a, 0.0, 1.0);
    return v;
  };
  NmOutcome out;
  std::vector<std::vector<double>> s{clampv(start)};
  for (std::size_t i = 0; i < n; ++i) {
    auto v = s[0];
    v[i] = v[i] - o.initial_step >= 0.0 ? v[i] - o.initial_step : v[i] + o.initial_step;
    s.push_back(clampv(v));
  }
  std::vector<double> fv;
  for (const auto& v : s) fv.push_back(f(v)), ++out.evals;
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < n; ++j) e = std::max(e, std::abs(s[i][j] - s[0][j]));
      d = std::max(d, e);
    }
    return d;
  };
  while (out.evals < budget) {
    std::vector<std::size_t> ord(s.size());
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> f2;
    for (auto i : ord) s2.push_back(s[i]), f2.push_back(fv[i]);
    s.swap(s2);
    fv.swap(f2);
    if (diameter() <= o.tol) break;
    std::vector<double> cen(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) cen[j] += s[i][j] / n;
    auto along = [&](double t) {
      std::vector<double> v(n);
      for (std::size_t j = 0; j < n; ++j) v[j] = cen[j] + t * (s[n][j] - cen[j]);
      return clampv(v);
    };
    const auto xr = along(-1.0);
    const double fr = f(xr);
    ++out.evals;
    if (fr < fv[0]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      ++out.evals;
      if (fe < fr) s[n] = xe, fv[n] = fe;
      else s[n] = xr, fv[n] = fr;
    } else if (fr < fv[n - 1]) {
      s[n] = xr, fv[n] = fr;
    } else {
      const auto xc = fr < fv[n] ? along(-0.5) : along(0.5);
      const double fc = f(xc);
      ++out.evals;
      if (fc < std::min(fr, fv[n])) {
        s[n] = xc, fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) s[i][j] = s[0][j] + 0.5 * (s[i][j] - s[0][j]);
          fv[i] = f(s[i]);
          ++out.evals;
        }
      }
    }
  }
  std::size_t b = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  out.x = s[b];
  out.f = fv[b];
  std::swap(s[0], s[b]);
  out.diameter = diameter();
  return out;
}

}  // namespace

PowerSearchResult powers_neldermead(const MetricKind& kind, const JointConstellation& c, double P,
                                    const NelderMeadOptions& options) {
  const int K = c.config.K;
  if (K < 2) throw InvalidInput("Nelder-Mead power search needs K >= 2");
  if (!(options.tol > 0.0) || options.max_evals < 1) throw InvalidInput("bad Nelder-Mead options");
  PowerSearchResult res;
  res.method = "nelder-mead";
  double best = -std::numeric_limits<double>::infinity();
  for (int full = 0; full < K; ++full) {
    auto powers_of = [&](const std::vector<double>& v) {
      std::vector<double> p(K);
      for (int k = 0, j = 0; k < K; ++k) p[k] = k == full ? P : std::clamp(v[j++], 0.0, 1.0) * P;
      return p;
    };
    auto f = [&](const std::vector<double>& v) { return -score(kind, c, powers_of(v)); };
    NmOutcome o = nelder_mead(f, std::vector<double>(K - 1, 1.0), options, options.max_evals);
    res.evaluations += o.evals;
    if (o.diameter > 1e-3) {
      NmOutcome o2 = nelder_mead(f, o.x, options, options.max_evals);
      res.evaluations += o2.evals;
      res.diagnostics.push_back("restarted from the best vertex for full-power user " + std::to_string(full + 1));
      if (o2.f <= o.f) o = o2;
    }
    if (-o.f > best) {
      best = -o.f;
      res.powers = powers_of(o.x);
    }
  }
  res.value = evaluate_metric(kind, with_powers(c, res.powers)).value;
  if (K == 2) res.theta = res.powers[1] / res.powers[0];
  return res;
}

}  // namespace ncmac
