#include "ncmac/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ncmac/constructions.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"

namespace ncmac {

namespace {

const double kInf = std::numeric_limits<double>::infinity();
constexpr double kNegligibleWeight = 1e-20;

double inner(const PointSet& a, const PointSet& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t n = 0; n < a[k].size(); ++n) s += real_inner(a[k][n], b[k][n]);
  return s;
}

PointSet zeros_like(const PointSet& s) {
  PointSet z(s.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    for (const auto& m : s[k]) z[k].push_back(CMatrix::Zero(m.rows(), m.cols()));
  return z;
}

PointSet project(const PointSet& s, const PointSet& g) {
  PointSet out(s.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t n = 0; n < s[k].size(); ++n) out[k].push_back(riemannian_grad(g[k][n], s[k][n]));
  return out;
}

PointSet axpy(const PointSet& a, double alpha, const PointSet& b) {
  PointSet out = a;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t n = 0; n < a[k].size(); ++n) out[k][n] += alpha * b[k][n];
  return out;
}

PointSet retract_all(const PointSet& s, const PointSet& d, double t) {
  PointSet out(s.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    for (std::size_t n = 0; n < s[k].size(); ++n) out[k].push_back(retract(s[k][n], d[k][n], t));
  return out;
}

void mask(PointSet& g, const std::vector<bool>& active) {
  if (active.empty()) return;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!active[k])
      for (auto& m : g[k]) m.setZero();
}

// sum of X_ab conj(Y_ab) = tr(X Y) for Hermitian Y
double tr_herm(const CMatrix& x, const CMatrix& y) {
  return (x.array() * y.array().conjugate()).real().sum();
}

}  // namespace

MetricObjective::MetricObjective(MetricKind kind, int T, std::vector<int> M, std::vector<double> powers,
                                 double epsilon)
    : kind_(kind), T_(T), M_(std::move(M)), powers_(std::move(powers)), epsilon_(epsilon) {
  const bool ok = (kind_.type == MetricKind::Type::J && kind_.s == 0.5) || kind_.type == MetricKind::Type::D ||
                  kind_.type == MetricKind::Type::E || kind_.type == MetricKind::Type::M1 ||
                  kind_.type == MetricKind::Type::M2;
  if (!ok) throw Unsupported("no analytic gradient for metric '" + kind_.label() + "'");
  kind_.validate();
  if (!(epsilon_ > 0.0)) throw InvalidInput("epsilon must be positive");
  if (M_.size() != powers_.size()) throw DimensionMismatch("one power per user required");
  for (std::size_t k = 0; k < M_.size(); ++k) rho_.push_back(powers_[k] * T_ / M_[k]);
}

JointConstellation MetricObjective::to_constellation(const PointSet& s, int N) const {
  JointConstellation c;
  c.config.T = T_;
  c.config.K = static_cast<int>(M_.size());
  c.config.M = M_;
  c.config.N = N;
  c.config.P = *std::max_element(powers_.begin(), powers_.end());
  for (std::size_t k = 0; k < s.size(); ++k) {
    UserConstellation u;
    u.power = powers_[k];
    const double f = std::sqrt(rho_[k]);
    for (const auto& p : s[k]) u.symbols.push_back(f * p);
    std::size_t n = u.size(), b = 0;
    while ((std::size_t{1} << b) < n) ++b;
    u.bits = (std::size_t{1} << b) == n ? static_cast<int>(b) : -1;
    c.users.push_back(std::move(u));
  }
  return c;
}

double MetricObjective::evaluate(const PointSet& s, PointSet* egrad, double* extremum) const {
  const std::size_t K = s.size();
  if (K != M_.size()) throw DimensionMismatch("point set does not match the user count");
  const int T = T_;
  const double lnT2 = T * std::log(2.0);

  // per-user rank-M_k updates rho s s^H
  std::vector<std::vector<CMatrix>> S(K);
  std::vector<std::size_t> sizes(K);
  std::size_t count = 1;
  for (std::size_t k = 0; k < K; ++k) {
    sizes[k] = s[k].size();
    count *= sizes[k];
    for (const auto& p : s[k]) S[k].push_back(rho_[k] * (p * p.adjoint()));
  }
  std::vector<std::vector<std::size_t>> idx(count, std::vector<std::size_t>(K));
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t f = i;
    for (std::size_t k = K; k-- > 0;) {
      idx[i][k] = f % sizes[k];
      f /= sizes[k];
    }
  }
  const CMatrix I = CMatrix::Identity(T, T);
  std::vector<CMatrix> Pm(count), Ainv;
  std::vector<double> logdet, trP;
  for (std::size_t i = 0; i < count; ++i) {
    Pm[i] = CMatrix::Zero(T, T);
    for (std::size_t k = 0; k < K; ++k) Pm[i] += S[k][idx[i][k]];
  }
  const auto type = kind_.type;
  const bool needs_inverse = type == MetricKind::Type::J || type == MetricKind::Type::D || type == MetricKind::Type::E;
  if (needs_inverse) {
    Ainv.resize(count);
    logdet.resize(count);
    Eigen::LLT<CMatrix> llt(T);
    for (std::size_t i = 0; i < count; ++i) {
      llt.compute(I + Pm[i]);
      Ainv[i] = llt.solve(I);
      double ld = 0.0;
      for (int a = 0; a < T; ++a) ld += std::log(llt.matrixLLT()(a, a).real());
      logdet[i] = 2.0 * ld;
    }
  }
  std::vector<CMatrix> X;  // joint symbols for m2
  if (type == MetricKind::Type::M1 || type == MetricKind::Type::M2) {
    trP.resize(count);
    for (std::size_t i = 0; i < count; ++i) trP[i] = Pm[i].trace().real();
  }
  const int Mt = std::accumulate(M_.begin(), M_.end(), 0);
  if (type == MetricKind::Type::M2) {
    X.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      X[i].resize(T, Mt);
      int col = 0;
      for (std::size_t k = 0; k < K; ++k) {
        X[i].middleCols(col, M_[k]) = std::sqrt(rho_[k]) * s[k][idx[i][k]];
        col += M_[k];
      }
    }
  }

  // pair values; ordered kinds store (i->j) and (j->i) next to each other
  const bool two_way = type == MetricKind::Type::D || type == MetricKind::Type::E;
  const std::size_t npairs = count * (count - 1) / 2;
  std::vector<double> f(two_way ? 2 * npairs : npairs);
  {
    CMatrix C(T, T);
    Eigen::LLT<CMatrix> llt(T);
    std::size_t p = 0;
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j < count; ++j, ++p) {
        switch (type) {
          case MetricKind::Type::J: {
            C = Ainv[i] + Ainv[j];
            llt.compute(C);
            double ld = 0.0;
            for (int a = 0; a < T; ++a) ld += std::log(llt.matrixLLT()(a, a).real());
            f[p] = 2.0 * ld - lnT2 + 0.5 * (logdet[i] + logdet[j]);
            break;
          }
          case MetricKind::Type::D:
            f[2 * p] = tr_herm(Pm[i], Ainv[j]);
            f[2 * p + 1] = tr_herm(Pm[j], Ainv[i]);
            break;
          case MetricKind::Type::E:
            f[2 * p] = tr_herm(Pm[i], Ainv[j]) + Ainv[j].trace().real() - T - logdet[i] + logdet[j];
            f[2 * p + 1] = tr_herm(Pm[j], Ainv[i]) + Ainv[i].trace().real() - T - logdet[j] + logdet[i];
            break;
          case MetricKind::Type::M1: {
            const double n = trP[i] * trP[j];
            f[p] = n > 0.0 ? tr_herm(Pm[i], Pm[j]) / n : 0.0;
            break;
          }
          case MetricKind::Type::M2: {
            const double w = static_cast<double>(Mt) * Mt / (trP[i] * trP[j]);
            const CMatrix g = X[i].adjoint() * X[j];
            Eigen::SelfAdjointEigenSolver<CMatrix> es(w * (g.adjoint() * g), Eigen::EigenvaluesOnly);
            double ld = 0.0;
            for (Eigen::Index a = 0; a < es.eigenvalues().size(); ++a) {
              const double mu = es.eigenvalues()(a);
              ld = std::abs(1.0 - mu) <= 1e-12 ? -kInf : ld + std::log(std::abs(1.0 - mu));
              if (std::isinf(ld)) break;
            }
            f[p] = ld;
            break;
          }
          default: break;
        }
      }
  }

  // smoothing
  std::vector<double> z(f.size());
  double value = 0.0, sign = -1.0, scale = epsilon_;
  if (type == MetricKind::Type::M2) {
    sign = -static_cast<double>(kind_.N);
    scale = 1.0;
  } else if (type == MetricKind::Type::M1) {
    sign = 1.0;
  }
  for (std::size_t p = 0; p < f.size(); ++p) z[p] = sign * f[p] / scale;
  const double lse = log_sum_exp(z);
  value = type == MetricKind::Type::M2 ? std::log(2.0) + lse : epsilon_ * lse;
  if (extremum) {
    if (type == MetricKind::Type::M2) *extremum = value;
    else if (type == MetricKind::Type::M1) *extremum = f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
    else *extremum = f.empty() ? kInf : *std::min_element(f.begin(), f.end());
  }
  if (!egrad) return value;
  if (!std::isfinite(value)) throw Error("objective is not finite; gradient undefined");

  // dg/df_p = sign * softmax_p (scaled for m2)
  std::vector<CMatrix> W(count, CMatrix::Zero(T, T));
  {
    CMatrix C(T, T), Cinv(T, T), tmp(T, T), R(T, T), Rinv(T, T), Q(T, T);
    Eigen::LLT<CMatrix> llt(T);
    std::size_t p = 0;
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j < count; ++j, ++p) {
        if (two_way) {
          for (int dir = 0; dir < 2; ++dir) {
            const double wgt = std::exp(z[2 * p + dir] - lse);
            if (wgt < kNegligibleWeight) continue;
            const double coef = sign * wgt;
            const std::size_t a = dir == 0 ? i : j, b = dir == 0 ? j : i;  // pair a -> b
            tmp.noalias() = Ainv[b] * Pm[a];
            if (type == MetricKind::Type::D) {
              W[a] += coef * Ainv[b];
              W[b].noalias() -= coef * (tmp * Ainv[b]);
            } else {
              W[a] += coef * (Ainv[b] - Ainv[a]);
              tmp += Ainv[b];
              W[b].noalias() -= coef * (tmp * Ainv[b]);
              W[b] += coef * Ainv[b];
            }
          }
          continue;
        }
        const double wgt = std::exp(z[p] - lse);
        if (wgt < kNegligibleWeight) continue;
        const double coef = sign * wgt;
        switch (type) {
          case MetricKind::Type::J: {
            C = Ainv[i] + Ainv[j];
            llt.compute(C);
            Cinv = llt.solve(I);
            tmp.noalias() = Ainv[i] * Cinv;
            W[i] += coef * (0.5 * Ainv[i]);
            W[i].noalias() -= coef * (tmp * Ainv[i]);
            tmp.noalias() = Ainv[j] * Cinv;
            W[j] += coef * (0.5 * Ainv[j]);
            W[j].noalias() -= coef * (tmp * Ainv[j]);
            break;
          }
          case MetricKind::Type::M1: {
            const double n = trP[i] * trP[j];
            if (n <= 0.0) break;
            W[i] += coef * (Pm[j] / n - (f[p] / trP[i]) * I);
            W[j] += coef * (Pm[i] / n - (f[p] / trP[j]) * I);
            break;
          }
          case MetricKind::Type::M2: {
            const double w = static_cast<double>(Mt) * Mt / (trP[i] * trP[j]);
            Q.noalias() = Pm[i] * Pm[j];
            R = I - w * Q;
            Rinv = R.partialPivLu().inverse();
            const double tau = w * (Rinv * Q).trace().real();
            W[i] += coef * ((tau / trP[i]) * I);
            W[i].noalias() -= (coef * w) * (Pm[j] * Rinv);
            W[j] += coef * ((tau / trP[j]) * I);
            W[j].noalias() -= (coef * w) * (Rinv * Pm[i]);
            break;
          }
          default: break;
        }
      }
  }
  // collect per point and apply: grad = 2 rho herm(W) s
  egrad->assign(K, {});
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<CMatrix> acc(sizes[k], CMatrix::Zero(T, T));
    for (std::size_t i = 0; i < count; ++i) acc[idx[i][k]] += W[i];
    for (std::size_t n = 0; n < sizes[k]; ++n)
      (*egrad)[k].push_back((2.0 * rho_[k]) * (herm(acc[n]) * s[k][n]));
  }
  return value;
}

double QuadraticObjective::evaluate(const PointSet& s, PointSet* egrad, double* extremum) const {
  double v = 0.0;
  for (const auto& user : s)
    for (const auto& p : user) v += real_inner(p, H_ * p);
  if (egrad) {
    egrad->assign(s.size(), {});
    for (std::size_t k = 0; k < s.size(); ++k)
      for (const auto& p : s[k]) (*egrad)[k].push_back(2.0 * (herm(H_) * p));
  }
  if (extremum) *extremum = v;
  return v;
}

void OptimizerOptions::validate() const {
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  if (max_iters < 0) throw InvalidInput("max_iters must be non-negative");
  if (!(grad_tol > 0.0)) throw InvalidInput("grad_tol must be positive");
  if (!(initial_step > 0.0)) throw InvalidInput("initial step must be positive");
  if (!(contraction > 0.0 && contraction < 1.0)) throw InvalidInput("contraction must lie in (0,1)");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
    throw InvalidInput("sufficient-decrease constant must lie in (0,1)");
  if (max_backtracks < 1) throw InvalidInput("max_backtracks must be positive");
}

CMatrix riemannian_grad(const CMatrix& euclid_grad, const CMatrix& point) {
  return euclid_grad - point * (point.adjoint() * euclid_grad);
}

CMatrix retract(const CMatrix& point, const CMatrix& tangent, double step) {
  if (step == 0.0 || tangent.squaredNorm() == 0.0) return point;
  const CMatrix y = point + step * tangent;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(y.adjoint() * y);
  const RVector& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 1e-24 * std::max(1.0, ev.maxCoeff()))) throw InvalidInput("retraction is rank deficient");
  RVector inv_sqrt = ev.cwiseSqrt().cwiseInverse();
  return y * (es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint());
}

CMatrix euclidean_grad(const MetricKind& kind, const PointSet& s, int T, const std::vector<int>& M,
                       const std::vector<double>& powers, double epsilon, int k, int n) {
  MetricObjective obj(kind, T, M, powers, epsilon);
  PointSet g;
  obj.evaluate(s, &g);
  return g.at(k).at(n);
}

OptimizerState cg_optimize(const Objective& obj, const PointSet& init, const OptimizerOptions& options,
                           const std::vector<bool>& active, const TraceCallback& trace) {
  options.validate();
  if (!active.empty() && active.size() != init.size()) throw DimensionMismatch("active mask must have one entry per user");
  OptimizerState st;
  st.points = init;
  for (auto& user : st.points)
    for (auto& p : user) {
      const CMatrix e = p.adjoint() * p - CMatrix::Identity(p.cols(), p.cols());
      if (e.norm() > 1e-10) p = polar_factor(p);
    }
  PointSet eg;
  double f = obj.evaluate(st.points, &eg);
  if (!std::isfinite(f)) throw Error("initial objective is not finite");
  PointSet g = project(st.points, eg);
  mask(g, active);
  double gn = std::sqrt(inner(g, g));
  st.trace.push_back(f);
  st.grad_norms.push_back(gn);
  if (trace) trace(0, f, gn, 0.0);
  PointSet d = axpy(zeros_like(g), -1.0, g);
  bool steepest = true;
  double prev_step = 0.0, f_prev = f;
  st.stop_reason = "max-iters";
  for (int it = 0; it < options.max_iters; ++it) {
    if (gn <= options.grad_tol * std::max(1.0, std::abs(f))) {
      st.stop_reason = "gradient";
      break;
    }
    double slope = inner(g, d);
    if (!(slope < 0.0)) {
      d = axpy(zeros_like(g), -1.0, g);
      slope = -gn * gn;
      steepest = true;
      ++st.restarts;
    }
    // first trial step from the last decrease, assuming a quadratic along d
    double t = options.initial_step;
    if (prev_step > 0.0) {
      const double guess = 1.01 * 2.0 * (f - f_prev) / slope;
      if (std::isfinite(guess) && guess > 0.0) t = guess;
    }
    PointSet cand;
    double fc = kInf;
    bool accepted = false;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      cand = retract_all(st.points, d, t);
      fc = obj.evaluate(cand, nullptr);
      if (std::isfinite(fc) && fc <= f + options.sufficient_decrease * t * slope) {
        accepted = true;
        break;
      }
      t *= options.contraction;
    }
    if (!accepted) {
      if (!steepest) {
        d = axpy(zeros_like(g), -1.0, g);
        steepest = true;
        prev_step = 0.0;
        ++st.restarts;
        --it;  // retry the same iteration along steepest descent
        continue;
      }
      st.stop_reason = "line-search";
      break;
    }
    PointSet eg_new;
    const double f_new = obj.evaluate(cand, &eg_new);
    PointSet g_new = project(cand, eg_new);
    mask(g_new, active);
    const PointSet g_old_t = project(cand, g);
    const PointSet d_old_t = project(cand, d);
    const double gg = inner(g_new, g_new);
    const PointSet y = axpy(g_new, -1.0, g_old_t);
    double beta = 0.0;
    bool restart = false;
    if (options.powell_restart && std::abs(inner(g_new, g_old_t)) >= options.powell_threshold * gg) restart = true;
    if (!restart) {
      const double den = inner(d_old_t, y);
      if (std::abs(den) > 1e-300) beta = std::max(0.0, inner(g_new, y) / den);
      else restart = true;
    }
    if (restart) {
      beta = 0.0;
      ++st.restarts;
    }
    d = axpy(axpy(zeros_like(g_new), -1.0, g_new), beta, d_old_t);
    steepest = beta == 0.0;
    st.points = std::move(cand);
    f_prev = f;
    f = f_new;
    g = std::move(g_new);
    gn = std::sqrt(gg);
    prev_step = t;
    st.iterations = it + 1;
    st.trace.push_back(f);
    st.grad_norms.push_back(gn);
    st.steps.push_back(t);
    if (trace) trace(st.iterations, f, gn, t);
  }
  if (st.stop_reason == "max-iters" && gn <= options.grad_tol * std::max(1.0, std::abs(f))) st.stop_reason = "gradient";
  st.direction = d;
  st.gradient = g;
  return st;
}

double grad_check(const Objective& obj, const PointSet& s, double h, Rng& rng, int directions) {
  if (!(h > 0.0)) throw InvalidInput("finite-difference step must be positive");
  PointSet eg;
  obj.evaluate(s, &eg);
  const PointSet g = project(s, eg);
  const double gn = std::sqrt(inner(g, g));
  double worst = 0.0;
  for (int r = 0; r < directions; ++r) {
    PointSet xi(s.size());
    for (std::size_t k = 0; k < s.size(); ++k)
      for (const auto& p : s[k]) xi[k].push_back(riemannian_grad(rng.complex_gaussian(p.rows(), p.cols()), p));
    double xn = std::sqrt(inner(xi, xi));
    // lean toward the gradient so the reference derivative stays away from zero
    if (gn > 0.0) xi = axpy(axpy(zeros_like(xi), 1.0 / xn, xi), 1.0 / gn, g);
    xn = std::sqrt(inner(xi, xi));
    xi = axpy(zeros_like(xi), 1.0 / xn, xi);
    const double an = inner(g, xi);
    const double fp = obj.evaluate(retract_all(s, xi, h), nullptr);
    const double fm = obj.evaluate(retract_all(s, xi, -h), nullptr);
    const double fd = (fp - fm) / (2.0 * h);
    const double den = std::max({std::abs(an), std::abs(fd), 1e-300});
    worst = std::max(worst, std::abs(fd - an) / den);
  }
  return worst;
}

PointSet random_points(int T, const std::vector<int>& M, const std::vector<std::size_t>& sizes, Rng& rng) {
  if (M.size() != sizes.size()) throw DimensionMismatch("one size per user required");
  PointSet s(M.size());
  for (std::size_t k = 0; k < M.size(); ++k)
    for (std::size_t n = 0; n < sizes[k]; ++n) s[k].push_back(random_orthonormal(T, M[k], rng));
  return s;
}

PointSet points_from_constellation(const JointConstellation& c) {
  PointSet s(c.users.size());
  for (std::size_t k = 0; k < c.users.size(); ++k)
    for (const auto& x : c.users[k].symbols) s[k].push_back(polar_factor(x));
  return s;
}

double oriented_metric(const MetricKind& kind, double value) { return kind.higher_is_better() ? value : -value; }

std::vector<InitSpec> InitSpec::parse_list(const std::string& text) {
  std::vector<InitSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    InitSpec s;
    std::string head = item, arg;
    const auto colon = item.find(':');
    if (colon != std::string::npos) {
      head = item.substr(0, colon);
      arg = item.substr(colon + 1);
    }
    if (head == "precoding") s.kind = Kind::Precoding;
    else if (head == "partitioning") s.kind = Kind::Partitioning;
    else if (head == "pilot") s.kind = Kind::Pilot;
    else if (head == "random") s.kind = Kind::Random;
    else throw InvalidInput("unknown initializer '" + item + "'");
    if (!arg.empty()) {
      if (s.kind != Kind::Random) throw InvalidInput("only random takes a count: '" + item + "'");
      try {
        s.count = std::stoi(arg);
      } catch (const std::exception&) {
        throw InvalidInput("bad initializer count in '" + item + "'");
      }
      if (s.count < 1) throw InvalidInput("initializer count must be positive");
    }
    out.push_back(s);
  }
  if (out.empty()) throw InvalidInput("no initializers given");
  return out;
}

std::string InitSpec::label() const {
  switch (kind) {
    case Kind::Precoding: return "precoding";
    case Kind::Partitioning: return "partitioning";
    case Kind::Pilot: return "pilot";
    case Kind::Random: return "random";
  }
  return "?";
}

namespace {

std::vector<std::size_t> sizes_from_bits(const std::vector<int>& bits) {
  std::vector<std::size_t> sizes;
  for (int b : bits) {
    if (b < 0 || b > 20) throw InvalidInput("bits per user must lie in [0,20]");
    sizes.push_back(std::size_t{1} << b);
  }
  return sizes;
}

bool equal_antennas(const ChannelConfig& c) {
  return std::all_of(c.M.begin(), c.M.end(), [&](int m) { return m == c.M[0]; });
}

// Builds the starting points for one initializer; returns false with a warning
// when the construction does not apply.
bool initial_points(const InitSpec& spec, const ChannelConfig& cfg, const std::vector<int>& bits, Rng& rng,
                    PointSet& out, std::string& warning) {
  const auto sizes = sizes_from_bits(bits);
  try {
    switch (spec.kind) {
      case InitSpec::Kind::Random:
        out = random_points(cfg.T, cfg.M, sizes, rng);
        return true;
      case InitSpec::Kind::Pilot: {
        if (!equal_antennas(cfg)) throw Unsupported("pilot construction needs equal M_k");
        const int M = cfg.M[0];
        const int data = (cfg.T - cfg.K * M) * M;
        if (data <= 0) throw Unsupported("pilot construction needs T > K M");
        if (!std::all_of(bits.begin(), bits.end(), [&](int b) { return b == bits[0]; }))
          throw Unsupported("pilot construction needs equal rates");
        if (bits[0] % data != 0) throw Unsupported("rate is not a whole number of bits per data entry");
        const int q = 1 << (bits[0] / data);
        out = points_from_constellation(pilot_based(cfg.T, cfg.K, M, q, cfg.P));
        return true;
      }
      case InitSpec::Kind::Partitioning: {
        if (!equal_antennas(cfg)) throw Unsupported("partitioning needs equal M_k");
        std::size_t total = 0;
        for (auto s : sizes) total += s;
        const UserConstellation su = ustm_single_user(cfg.T, cfg.M[0], total, UstmMode::Optimized, rng);
        out = points_from_constellation(
            partition_construct(su.symbols, cfg, sizes, PartitionStrategy::Random, rng));
        return true;
      }
      case InitSpec::Kind::Precoding: {
        if (!equal_antennas(cfg)) throw Unsupported("precoding needs equal M_k");
        const int M = cfg.M[0];
        const PrecoderType type =
            cfg.T >= cfg.K * (cfg.K - 1) * M && cfg.K >= 2 ? PrecoderType::II : PrecoderType::I;
        const auto pre = build_precoder(cfg.T, cfg.K, M, type);
        const int reduced = cfg.T - (cfg.K - 1) * M;
        std::vector<std::vector<CMatrix>> sets;
        for (int k = 0; k < cfg.K; ++k)
          sets.push_back(ustm_single_user(reduced, M, sizes[k], UstmMode::Optimized, rng).symbols);
        std::vector<double> powers(cfg.K, cfg.P);
        out = points_from_constellation(precode_construct(sets, pre, powers, cfg));
        return true;
      }
    }
  } catch (const Error& e) {
    warning = spec.label() + " initializer skipped: " + e.what();
  }
  return false;
}

}  // namespace

MultiStartResult multi_start_optimize(const MetricKind& kind, const ChannelConfig& config,
                                      const std::vector<int>& bits, const std::vector<InitSpec>& inits,
                                      const OptimizerOptions& options, const TraceCallback& trace) {
  config.validate();
  if (static_cast<int>(bits.size()) != config.K) throw DimensionMismatch("one bit count per user required");
  std::vector<double> powers(config.K, config.P);
  MetricObjective obj(kind, config.T, config.M, powers, options.epsilon);
  MultiStartResult res;
  double best = -kInf;
  std::uint64_t stream = 0;
  for (const auto& spec : inits) {
    for (int r = 0; r < spec.count; ++r) {
      Rng rng = Rng::stream(options.seed, stream++);
      PointSet init;
      std::string warning;
      if (!initial_points(spec, config, bits, rng, init, warning)) {
        res.warnings.push_back(warning);
        break;
      }
      RunSummary sum;
      sum.label = spec.count > 1 ? spec.label() + ":" + std::to_string(r + 1) : spec.label();
      double m0 = 0.0;
      obj.evaluate(init, nullptr, &m0);
      const OptimizerState st = cg_optimize(obj, init, options, {}, trace);
      double m1 = 0.0;
      obj.evaluate(st.points, nullptr, &m1);
      sum.initial_metric = m0;
      sum.final_metric = m1;
      sum.iterations = st.iterations;
      sum.stop_reason = st.stop_reason;
      res.runs.push_back(sum);
      if (oriented_metric(kind, m1) > best) {
        best = oriented_metric(kind, m1);
        res.best = obj.to_constellation(st.points, config.N);
        res.best_metric = m1;
        res.best_run = res.runs.size() - 1;
      }
    }
  }
  if (res.runs.empty()) throw InvalidInput("no initializer could be constructed");
  return res;
}

AlternatingResult alternating_optimize(const MetricKind& kind, const ChannelConfig& config,
                                       const std::vector<int>& bits, const OptimizerOptions& options,
                                       int max_cycles, const PointSet* init, const TraceCallback& trace) {
  config.validate();
  if (static_cast<int>(bits.size()) != config.K) throw DimensionMismatch("one bit count per user required");
  std::vector<double> powers(config.K, config.P);
  MetricObjective obj(kind, config.T, config.M, powers, options.epsilon);
  PointSet s;
  if (init) {
    s = *init;
  } else {
    Rng rng = Rng::stream(options.seed, 0);
    s = random_points(config.T, config.M, sizes_from_bits(bits), rng);
  }
  AlternatingResult res;
  double m = 0.0;
  obj.evaluate(s, nullptr, &m);
  res.metric_trace.push_back(m);
  if (config.K == 1) {
    const OptimizerState st = cg_optimize(obj, s, options, {}, trace);
    obj.evaluate(st.points, nullptr, &m);
    res.metric_trace.push_back(m);
    res.cycles = 1;
    res.constellation = obj.to_constellation(st.points, config.N);
    return res;
  }
  for (int cyc = 0; cyc < max_cycles; ++cyc) {
    const double start = m;
    for (int k = 0; k < config.K; ++k) {
      std::vector<bool> active(config.K, false);
      active[k] = true;
      const OptimizerState st = cg_optimize(obj, s, options, active, trace);
      double mk = 0.0;
      obj.evaluate(st.points, nullptr, &mk);
      if (oriented_metric(kind, mk) >= oriented_metric(kind, m)) {
        s = st.points;
        m = mk;
      } else {
        ++res.rejected_steps;
      }
    }
    res.metric_trace.push_back(m);
    res.cycles = cyc + 1;
    const double gain = oriented_metric(kind, m) - oriented_metric(kind, start);
    if (gain < 1e-6 * std::max(1.0, std::abs(start))) break;
  }
  res.constellation = obj.to_constellation(s, config.N);
  return res;
}

}  // namespace ncmac
