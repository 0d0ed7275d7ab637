#include "ncmac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"

namespace ncmac {

namespace {

constexpr double kLambdaFloor = 1e-300;
// |1 - mu| below this makes the m2 determinant singular
constexpr double kM2Singular = 1e-12;
const double kInf = std::numeric_limits<double>::infinity();

struct SymbolCache {
  CMatrix x;
  CMatrix A;
  CMatrix Linv;  // inverse Cholesky factor of A
  double trAinv = 0.0;
  double norm2 = 0.0;
};

SymbolCache make_cache(const CMatrix& x) {
  SymbolCache s;
  s.x = x;
  s.A = signal_covariance(x);
  Eigen::LLT<CMatrix> llt(s.A);
  s.Linv = llt.matrixL().solve(CMatrix::Identity(x.rows(), x.rows()));
  s.trAinv = s.Linv.squaredNorm();
  s.norm2 = x.squaredNorm();
  return s;
}

std::vector<SymbolCache> make_caches(const JointConstellation& c) {
  std::vector<SymbolCache> out;
  out.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back(make_cache(c.joint_symbol(i)));
  return out;
}

RVector sorted_spectrum(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  RVector l = es.eigenvalues().reverse();
  for (Eigen::Index i = 0; i < l.size(); ++i) l(i) = std::max(l(i), kLambdaFloor);
  return l;
}

// spectrum of Gamma for the pair (a -> b)
RVector pair_spectrum(const SymbolCache& a, const SymbolCache& b) {
  const CMatrix y = b.Linv * a.x;
  CMatrix h = b.Linv * b.Linv.adjoint();
  h.noalias() += y * y.adjoint();
  return sorted_spectrum(h);
}

double m2_logdet(const CMatrix& x, const CMatrix& xp, int Mt, double n, double np, bool* negative = nullptr) {
  if (negative) *negative = false;
  if (n <= 0.0 || np <= 0.0) return 0.0;
  const double w = static_cast<double>(Mt) * Mt / (n * np);
  const CMatrix g = x.adjoint() * xp;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(w * (g.adjoint() * g), Eigen::EigenvaluesOnly);
  double s = 0.0;
  int flips = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double mu = es.eigenvalues()(i);
    if (std::abs(1.0 - mu) <= kM2Singular) return -kInf;
    if (mu > 1.0) ++flips;
    s += std::log(std::abs(1.0 - mu));
  }
  if (negative) *negative = flips % 2 == 1;
  return s;
}

RVector reciprocal(const RVector& l) {
  RVector r(l.size());
  for (Eigen::Index i = 0; i < l.size(); ++i) r(l.size() - 1 - i) = std::max(1.0 / l(i), kLambdaFloor);
  return r;
}

}  // namespace

EigenSpectrum gamma_spectrum(const CMatrix& x, const CMatrix& xp) {
  if (x.rows() != xp.rows()) throw DimensionMismatch("symbols must have the same number of rows");
  require_finite(x, "symbol");
  require_finite(xp, "symbol");
  return {pair_spectrum(make_cache(x), make_cache(xp))};
}

double b_from_spectrum(const RVector& l) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i) s += std::abs(std::log(l(i)));
  return s;
}

double riemannian_from_spectrum(const RVector& l) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    const double v = std::log(l(i));
    s += v * v;
  }
  return std::sqrt(s);
}

double J_from_spectrum(const RVector& l, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidInput("Chernoff parameter s must lie in [0,1]");
  double r = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    const double ln = std::log(l(i));
    // ln(s l^{1-s} + (1-s) l^{-s}) = -s ln l + ln(s l + 1 - s)
    r += -s * ln + std::log(s * l(i) + (1.0 - s));
  }
  return r;
}

// 1/2 ln(1 + tr(Gamma)/2) - (T/2) ln 2. Expanding prod(2 + l + 1/l) and keeping
// the constant and linear terms only ever lowers J_{1/2}.
double relaxed_from_spectrum(const RVector& l) {
  return 0.5 * std::log(1.0 + 0.5 * l.sum()) - 0.5 * static_cast<double>(l.size()) * std::log(2.0);
}

double e_from_spectrum(const RVector& l) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.size(); ++i) s += l(i) - 1.0 - std::log(l(i));
  return s;
}

double metric_b(const CMatrix& x, const CMatrix& xp) { return b_from_spectrum(gamma_spectrum(x, xp).lambdas); }

double riemannian_distance(const CMatrix& x, const CMatrix& xp) {
  return riemannian_from_spectrum(gamma_spectrum(x, xp).lambdas);
}

double metric_J(const CMatrix& x, const CMatrix& xp, double s) {
  return J_from_spectrum(gamma_spectrum(x, xp).lambdas, s);
}

double relaxed_bound(const CMatrix& x, const CMatrix& xp) {
  return relaxed_from_spectrum(gamma_spectrum(x, xp).lambdas);
}

double metric_d(const CMatrix& x, const CMatrix& xp) {
  if (x.rows() != xp.rows()) throw DimensionMismatch("symbols must have the same number of rows");
  Eigen::LLT<CMatrix> llt(signal_covariance(xp));
  return llt.matrixL().solve(x).squaredNorm();
}

double metric_e(const CMatrix& x, const CMatrix& xp) { return e_from_spectrum(gamma_spectrum(x, xp).lambdas); }

double pair_m1(const CMatrix& x, const CMatrix& xp) {
  const double n = x.squaredNorm() * xp.squaredNorm();
  if (n <= 0.0) return 0.0;
  return (x.adjoint() * xp).squaredNorm() / n;
}

double pair_m2_logdet(const CMatrix& x, const CMatrix& xp) {
  if (x.cols() != xp.cols()) throw DimensionMismatch("joint symbols must have the same width");
  return m2_logdet(x, xp, static_cast<int>(x.cols()), x.squaredNorm(), xp.squaredNorm());
}

double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -kInf;
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double a : v) s += std::exp(a - m);
  return m + std::log(s);
}

MetricKind MetricKind::parse(const std::string& text) {
  std::string head = text, arg;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    head = text.substr(0, colon);
    arg = text.substr(colon + 1);
  }
  auto number = [&](double fallback) {
    if (arg.empty()) return fallback;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(arg, &used);
    } catch (const std::exception&) {
      throw InvalidInput("bad metric parameter in '" + text + "'");
    }
    if (used != arg.size()) throw InvalidInput("bad metric parameter in '" + text + "'");
    return v;
  };
  MetricKind k;
  if (head == "b") k.type = Type::B;
  else if (head == "riemannian") k.type = Type::Riemannian;
  else if (head == "J") { k.type = Type::J; k.s = number(0.5); }
  else if (head == "relaxed") k.type = Type::Relaxed;
  else if (head == "d") k.type = Type::D;
  else if (head == "dk") k.type = Type::Dk;
  else if (head == "e") k.type = Type::E;
  else if (head == "m1") k.type = Type::M1;
  else if (head == "m2") {
    k.type = Type::M2;
    const double n = number(4.0);
    if (n != std::floor(n)) throw InvalidInput("m2 needs an integer N");
    k.N = static_cast<int>(n);
  } else if (head == "coherence") k.type = Type::Coherence;
  else throw InvalidInput("unknown metric '" + text + "'");
  if (!arg.empty() && k.type != Type::J && k.type != Type::M2)
    throw InvalidInput("metric '" + head + "' takes no parameter");
  k.validate();
  return k;
}

void MetricKind::validate() const {
  if (type == Type::J && !(s >= 0.0 && s <= 1.0)) throw InvalidInput("Chernoff parameter s must lie in [0,1]");
  if (type == Type::M2 && N < 1) throw InvalidInput("m2 needs N >= 1");
}

std::string MetricKind::name() const {
  switch (type) {
    case Type::B: return "b";
    case Type::Riemannian: return "riemannian";
    case Type::J: return "J";
    case Type::Relaxed: return "relaxed";
    case Type::D: return "d";
    case Type::Dk: return "dk";
    case Type::E: return "e";
    case Type::M1: return "m1";
    case Type::M2: return "m2";
    case Type::Coherence: return "coherence";
  }
  return "?";
}

std::string MetricKind::param() const {
  std::ostringstream os;
  if (type == Type::J) os << s;
  if (type == Type::M2) os << N;
  return os.str();
}

std::string MetricKind::label() const {
  const std::string p = param();
  return p.empty() ? name() : name() + ":" + p;
}

bool MetricKind::higher_is_better() const {
  return !(type == Type::M1 || type == Type::M2 || type == Type::Coherence);
}

bool MetricKind::ordered() const {
  return type == Type::D || type == Type::E || type == Type::Relaxed || (type == Type::J && s != 0.5);
}

namespace {

// Visits every pair once with its spectrum; f(i, j, lambda(i->j)).
template <class F>
void for_each_spectrum(const std::vector<SymbolCache>& cache, F&& f) {
  for (std::size_t i = 0; i < cache.size(); ++i)
    for (std::size_t j = i + 1; j < cache.size(); ++j) f(i, j, pair_spectrum(cache[i], cache[j]));
}

MetricReport spectral_report(const MetricKind& kind, const JointConstellation& c, bool keep_pairs) {
  MetricReport r;
  r.kind = kind;
  r.powers = c.powers();
  if (c.size() < 2) {
    r.value = kInf;
    r.diagnostics.push_back("fewer than two joint symbols: no pairs");
    return r;
  }
  const auto cache = make_caches(c);
  const std::size_t n = cache.size();
  const bool ordered = kind.ordered();
  if (keep_pairs) r.pair_values.assign(ordered ? n * (n - 1) : n * (n - 1) / 2, 0.0);
  double best = kInf;
  auto consider = [&](double v, std::size_t i, std::size_t j) {
    if (v < best) {
      best = v;
      r.arg_i = i;
      r.arg_j = j;
    }
  };
  auto ordered_slot = [n](std::size_t i, std::size_t j) { return i * (n - 1) + (j < i ? j : j - 1); };
  std::size_t u = 0;
  for_each_spectrum(cache, [&](std::size_t i, std::size_t j, const RVector& l) {
    double v = 0.0, w = 0.0;
    switch (kind.type) {
      case MetricKind::Type::B: v = b_from_spectrum(l); break;
      case MetricKind::Type::Riemannian: v = riemannian_from_spectrum(l); break;
      case MetricKind::Type::J:
        v = J_from_spectrum(l, kind.s);
        if (ordered) w = J_from_spectrum(reciprocal(l), kind.s);
        break;
      case MetricKind::Type::Relaxed:
        v = relaxed_from_spectrum(l);
        w = relaxed_from_spectrum(reciprocal(l));
        break;
      case MetricKind::Type::D:
        v = l.sum() - cache[j].trAinv;
        w = reciprocal(l).sum() - cache[i].trAinv;
        break;
      case MetricKind::Type::E:
        v = e_from_spectrum(l);
        w = e_from_spectrum(reciprocal(l));
        break;
      default: throw Unsupported("not a spectral metric");
    }
    consider(v, i, j);
    if (ordered) consider(w, j, i);
    if (keep_pairs) {
      if (ordered) {
        r.pair_values[ordered_slot(i, j)] = v;
        r.pair_values[ordered_slot(j, i)] = w;
      } else {
        r.pair_values[u] = v;
      }
    }
    ++u;
  });
  r.value = best;
  return r;
}

}  // namespace

MetricReport b_min(const JointConstellation& c, bool keep_pairs) {
  return spectral_report(MetricKind::b(), c, keep_pairs);
}

MetricReport J_min(const JointConstellation& c, double s, bool keep_pairs) {
  if (!(s >= 0.0 && s <= 1.0)) throw InvalidInput("Chernoff parameter s must lie in [0,1]");
  return spectral_report(MetricKind::J(s), c, keep_pairs);
}

MetricReport d_min(const JointConstellation& c, bool keep_pairs) {
  return spectral_report(MetricKind::d(), c, keep_pairs);
}

MetricReport e_min(const JointConstellation& c, bool keep_pairs) {
  return spectral_report(MetricKind::e(), c, keep_pairs);
}

MetricReport metric_m1(const JointConstellation& c, bool keep_pairs) {
  MetricReport r;
  r.kind = MetricKind::m1();
  r.powers = c.powers();
  const auto xs = c.joint_symbols();
  r.value = -kInf;
  if (xs.size() < 2) r.diagnostics.push_back("fewer than two joint symbols: no pairs");
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double v = pair_m1(xs[i], xs[j]);
      if (keep_pairs) r.pair_values.push_back(v);
      if (v > r.value) {
        r.value = v;
        r.arg_i = i;
        r.arg_j = j;
      }
    }
  return r;
}

MetricReport metric_m2(const JointConstellation& c, int N, bool keep_pairs) {
  if (N < 1) throw InvalidInput("m2 needs N >= 1");
  MetricReport r;
  r.kind = MetricKind::m2(N);
  r.powers = c.powers();
  const auto xs = c.joint_symbols();
  const int Mt = c.config.M_tot();
  std::vector<double> norms;
  for (const auto& x : xs) norms.push_back(x.squaredNorm());
  std::vector<double> terms;
  double worst = kInf;
  std::size_t negatives = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      bool negative = false;
      const double ld = m2_logdet(xs[i], xs[j], Mt, norms[i], norms[j], &negative);
      if (negative) ++negatives;
      if (keep_pairs) r.pair_values.push_back(ld);
      if (ld < worst) {
        worst = ld;
        r.arg_i = i;
        r.arg_j = j;
      }
      if (std::isinf(ld)) {
        std::ostringstream os;
        os << "singular determinant for pair " << i << "-" << j;
        r.diagnostics.push_back(os.str());
        terms.push_back(kInf);
      } else {
        terms.push_back(-N * ld);
      }
    }
  if (terms.empty()) {
    r.value = -kInf;
    r.diagnostics.push_back("fewer than two joint symbols: no pairs");
    return r;
  }
  if (negatives > 0 && N % 2 == 1)
    r.diagnostics.push_back(std::to_string(negatives) + " pairs have a negative determinant; magnitudes used");
  // each unordered pair appears twice among the ordered pairs
  r.value = std::log(2.0) + log_sum_exp(terms);
  return r;
}

MetricReport cross_coherence(const JointConstellation& c) {
  MetricReport r;
  r.kind = {MetricKind::Type::Coherence};
  r.powers = c.powers();
  const double PT = c.config.P * c.config.T;
  std::vector<const CMatrix*> all;
  for (const auto& u : c.users)
    for (const auto& x : u.symbols) all.push_back(&x);
  r.value = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      // distinct pairs of the same user, and every pair across users
      const double v = ((*all[i]).adjoint() * (*all[j])).squaredNorm() / (PT * PT);
      if (v > r.value) {
        r.value = v;
        r.arg_i = i;
        r.arg_j = j;
      }
    }
  return r;
}

namespace {

struct DkResult {
  double value = kInf;
  std::size_t from = 0, to = 0;
};

DkResult d_k_search(const JointConstellation& c, int k) {
  if (k < 0 || k >= c.config.K) throw InvalidInput("user index out of range");
  if (c.users[k].size() < 2) throw InvalidInput("d_k needs at least two symbols for user " + std::to_string(k + 1));
  const int T = c.config.T;
  DkResult best;
  // others: all joint indices with user k fixed to 0
  JointConstellation others = c;
  others.users[k].symbols.resize(1);
  for (std::size_t o = 0; o < others.size(); ++o) {
    JointIndex idx = others.unflatten(o);
    CMatrix base = CMatrix::Identity(T, T);
    for (int j = 0; j < c.config.K; ++j)
      if (j != k) {
        const CMatrix& xj = c.users[j].symbols[idx[j]];
        base.noalias() += xj * xj.adjoint();
      }
    for (std::size_t b = 0; b < c.users[k].size(); ++b) {
      const CMatrix& xb = c.users[k].symbols[b];
      CMatrix B = base;
      B.noalias() += xb * xb.adjoint();
      Eigen::LLT<CMatrix> llt(B);
      for (std::size_t a = 0; a < c.users[k].size(); ++a) {
        if (a == b) continue;
        const double v = llt.matrixL().solve(c.users[k].symbols[a]).squaredNorm();
        if (v < best.value) {
          best.value = v;
          idx[k] = a;
          best.from = c.flatten(idx);
          idx[k] = b;
          best.to = c.flatten(idx);
        }
      }
    }
  }
  return best;
}

}  // namespace

double metric_d_k(const JointConstellation& c, int k) { return d_k_search(c, k).value; }

MetricReport min_k_d(const JointConstellation& c) {
  MetricReport r;
  r.kind = {MetricKind::Type::Dk};
  r.powers = c.powers();
  r.value = kInf;
  for (int k = 0; k < c.config.K; ++k) {
    if (c.users[k].size() < 2) {
      r.diagnostics.push_back("user " + std::to_string(k + 1) + " has a single symbol and is skipped");
      continue;
    }
    const DkResult d = d_k_search(c, k);
    r.pair_values.push_back(d.value);
    if (d.value < r.value) {
      r.value = d.value;
      r.arg_i = d.from;
      r.arg_j = d.to;
    }
  }
  return r;
}

MetricReport evaluate_metric(const MetricKind& kind, const JointConstellation& c, bool keep_pairs) {
  kind.validate();
  switch (kind.type) {
    case MetricKind::Type::M1: return metric_m1(c, keep_pairs);
    case MetricKind::Type::M2: return metric_m2(c, kind.N, keep_pairs);
    case MetricKind::Type::Coherence: return cross_coherence(c);
    case MetricKind::Type::Dk: return min_k_d(c);
    default: return spectral_report(kind, c, keep_pairs);
  }
}

double smoothed_objective(const MetricKind& kind, const JointConstellation& c, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  switch (kind.type) {
    case MetricKind::Type::M2: return metric_m2(c, kind.N).value;
    case MetricKind::Type::J:
    case MetricKind::Type::D:
    case MetricKind::Type::E:
    case MetricKind::Type::M1: break;
    default: throw Unsupported("no smoothed objective for metric '" + kind.label() + "'");
  }
  const MetricReport r = evaluate_metric(kind, c, true);
  const double sign = kind.type == MetricKind::Type::M1 ? 1.0 : -1.0;
  std::vector<double> v;
  v.reserve(r.pair_values.size());
  for (double f : r.pair_values) v.push_back(sign * f / epsilon);
  return epsilon * log_sum_exp(v);
}

}  // namespace ncmac
