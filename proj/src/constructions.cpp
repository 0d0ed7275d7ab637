#include "ncmac/constructions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"
#include "ncmac/optimizer.hpp"

namespace ncmac {

namespace mp = boost::multiprecision;

UserConstellation ustm_single_user(int T, int M, std::size_t size, UstmMode mode, Rng& rng,
                                   std::vector<std::string>* warnings) {
  if (M < 1 || M > T) throw InvalidInput("need 1 <= M <= T");
  if (size < 1) throw InvalidInput("size must be at least 1");
  UserConstellation u;
  u.power = static_cast<double>(M) / T;
  for (std::size_t n = 0; n < size; ++n) u.symbols.push_back(random_orthonormal(T, M, rng));
  std::size_t b = 0;
  while ((std::size_t{1} << b) < size) ++b;
  u.bits = (std::size_t{1} << b) == size ? static_cast<int>(b) : -1;
  if (mode == UstmMode::Random || size < 2) return u;

  if (warnings && static_cast<double>(size) > std::pow(2.0, 2.0 * M * (T - M) * 1.2))
    warnings->push_back("constellation is dense for the manifold dimension; packing quality will be poor");
  PointSet s{u.symbols};
  OptimizerOptions opt;
  opt.max_iters = 300;
  // tighten the smoothing in stages so the max is approached gradually
  for (double eps : {0.05, 0.01, 0.002}) {
    opt.epsilon = eps;
    MetricObjective obj(MetricKind::m1(), T, {M}, {1.0}, eps);
    s = cg_optimize(obj, s, opt).points;
  }
  u.symbols = s[0];
  return u;
}

double max_pair_coherence(const std::vector<CMatrix>& pool) {
  double c = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j)
      c = std::max(c, (pool[i].adjoint() * pool[j]).squaredNorm() / (pool[i].squaredNorm() * pool[j].squaredNorm()));
  return c;
}

JointConstellation partition_construct(const std::vector<CMatrix>& pool, const ChannelConfig& config,
                                       const std::vector<std::size_t>& sizes, PartitionStrategy strategy,
                                       Rng& rng) {
  config.validate();
  if (static_cast<int>(sizes.size()) != config.K) throw DimensionMismatch("one size per user required");
  const std::size_t need = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (need > pool.size()) throw InvalidInput("not enough single-user symbols for the requested sizes");
  for (const auto& s : pool)
    for (int k = 0; k < config.K; ++k)
      if (s.rows() != config.T || s.cols() != config.M[k])
        throw DimensionMismatch("pool symbols must be T x M_k for every user");

  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  if (strategy == PartitionStrategy::GreedySwap && need < pool.size()) {
    // Only the set of used symbols matters for the cross-coherence, so the
    // search swaps used symbols with unused ones. Ties on the maximum are
    // broken by the sum of squared coherences.
    const std::size_t n = pool.size();
    Eigen::MatrixXd coh = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        coh(i, j) = coh(j, i) =
            (pool[i].adjoint() * pool[j]).squaredNorm() / (pool[i].squaredNorm() * pool[j].squaredNorm());
    auto score = [&](const std::vector<std::size_t>& o) {
      double mx = 0.0, sq = 0.0;
      for (std::size_t a = 0; a < need; ++a)
        for (std::size_t b = a + 1; b < need; ++b) {
          const double v = coh(o[a], o[b]);
          mx = std::max(mx, v);
          sq += v * v;
        }
      return std::make_pair(mx, sq);
    };
    auto cur = score(order);
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t a = 0; a < need && !improved; ++a)
        for (std::size_t b = need; b < n && !improved; ++b) {
          std::swap(order[a], order[b]);
          const auto cand = score(order);
          const bool better = cand.first < cur.first - 1e-15 ||
                              (cand.first <= cur.first + 1e-15 && cand.second < cur.second - 1e-15);
          if (better) {
            cur = cand;
            improved = true;
          } else {
            std::swap(order[a], order[b]);
          }
        }
    }
  }

  JointConstellation c;
  c.config = config;
  std::size_t pos = 0;
  for (int k = 0; k < config.K; ++k) {
    UserConstellation u;
    u.power = config.P;
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      const CMatrix& s = pool[order[pos++]];
      u.symbols.push_back(std::sqrt(config.P * config.T) / s.norm() * s);
    }
    std::size_t b = 0;
    while ((std::size_t{1} << b) < sizes[k]) ++b;
    u.bits = (std::size_t{1} << b) == sizes[k] ? static_cast<int>(b) : -1;
    c.users.push_back(std::move(u));
  }
  return c;
}

double phi_K(int K) {
  if (K < 1) throw InvalidInput("K must be at least 1");
  return (K - 1.0) / (4.0 * K * (K == 2 ? 2.0 : 1.0));
}

namespace {

using BigFloat = mp::cpp_bin_float_50;

mp::cpp_int factorial(int n) {
  mp::cpp_int f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void check_dims(int T, int M) {
  if (M < 1 || T <= M) throw InvalidInput("need 1 <= M < T");
  if (M * (T - M) > 5000) throw Unsupported("manifold dimension too large for exact factorials");
}

BigFloat kappa_big(int T, int M) {
  check_dims(T, M);
  const int m = std::min(M, T - M);
  mp::cpp_int num = 1;
  for (int i = 1; i <= m; ++i) num *= factorial(T - i) / factorial(m - i);
  const mp::cpp_int den = factorial(M * (T - M));
  return BigFloat(num) / BigFloat(den);
}

// [(a + phi)^{1/2} - phi^{1/2}]^2
double coherence_threshold(double a, double phi) {
  const double r = std::sqrt(a + phi) - std::sqrt(phi);
  return r * r;
}

double to_double_checked(const BigFloat& v, const char* what) {
  const double d = v.convert_to<double>();
  if (!std::isfinite(d) || !(d > 0.0)) throw Unsupported(std::string(what) + " is not representable in double precision");
  return d;
}

}  // namespace

double log2_kappa_TM(int T, int M) { return mp::log2(kappa_big(T, M)).convert_to<double>(); }

double kappa_TM(int T, int M) { return to_double_checked(kappa_big(T, M), "kappa"); }

double nu_KM(int K, int M) {
  if (M < 1) throw InvalidInput("M must be at least 1");
  return std::sqrt(M - coherence_threshold(1.0 / (K * M), phi_K(K)));
}

double zeta_KM(int K, int M) {
  if (M < 1) throw InvalidInput("M must be at least 1");
  return 1.0 - 0.5 * std::log2(1.0 - coherence_threshold(1.0 / (K * M), phi_K(K)) / M);
}

double log2_beta_TKM(int T, int K, int M) {
  const double c = coherence_threshold(1.0 / (K * M), phi_K(K));
  const double dim = static_cast<double>(M) * (T - M);
  return -log2_kappa_TM(T, M) + 2.0 * dim - dim * std::log2(M - c);
}

PartitionFeasibility partition_feasibility(int T, int K, int M, std::optional<double> P) {
  check_dims(T, M);
  if (K < 1) throw InvalidInput("K must be at least 1");
  PartitionFeasibility f;
  f.asymptotic = !P.has_value();
  if (P && !(*P > 0.0)) throw InvalidInput("P must be positive");
  f.phi = phi_K(K);
  f.alpha = (P ? 1.0 / (*P * T) : 0.0) + 1.0 / M;
  f.c_threshold = coherence_threshold(f.alpha / K, f.phi);
  f.delta_requirement = std::sqrt(M - f.c_threshold);
  const BigFloat kap = kappa_big(T, M);
  f.kappa = to_double_checked(kap, "kappa");
  const double dim = static_cast<double>(M) * (T - M);
  const double lk = mp::log2(kap).convert_to<double>();
  f.log2_cardinality_bound = -lk + 2.0 * dim - dim * std::log2(M - f.c_threshold);
  f.cardinality_bound = std::exp2(f.log2_cardinality_bound);
  f.nu = nu_KM(K, M);
  f.log2_beta = log2_beta_TKM(T, K, M);
  f.beta = std::exp2(f.log2_beta);
  if (!std::isfinite(f.beta) || !std::isfinite(f.cardinality_bound))
    throw Unsupported("beta is not representable in double precision; use log2_beta_TKM");
  f.zeta = zeta_KM(K, M);
  return f;
}

double partition_dmin_bound(int K, double P, int T, int M, double c) {
  const double alpha = 1.0 / (P * T) + 1.0 / M;
  const double inner = alpha - std::sqrt(K * (K - 1.0) * c / (K == 2 ? 2.0 : 1.0));
  return P * T * (1.0 - K * c / inner);
}

std::vector<Precoder> build_precoder(int T, int K, int M, PrecoderType type) {
  if (K < 1 || M < 1) throw InvalidInput("K and M must be positive");
  const int width = T - (K - 1) * M;
  if (width < M) throw InvalidInput("precoder needs T - (K-1) M >= M");
  std::vector<Precoder> out;
  for (int k = 0; k < K; ++k) {
    std::vector<int> cols;
    std::vector<double> w;
    Precoder p;
    if (type == PrecoderType::I) {
      if (T < K * M) throw InvalidInput("Type-I precoder needs T >= K M");
      p.eta1 = std::sqrt(static_cast<double>(K));
      for (int i = k * M; i < (k + 1) * M; ++i) {
        cols.push_back(i);
        w.push_back(p.eta1);
      }
      for (int i = K * M; i < T; ++i) {
        cols.push_back(i);
        w.push_back(1.0);
      }
    } else {
      if (K < 2) throw InvalidInput("Type-II precoder needs K >= 2");
      if (T < K * (K - 1) * M) throw InvalidInput("Type-II precoder needs T >= K (K-1) M");
      p.eta1 = std::sqrt(static_cast<double>(K) / (K - 1));
      for (int i = 0; i < k * (K - 1) * M; ++i) {
        cols.push_back(i);
        w.push_back(p.eta1);
      }
      for (int i = (k + 1) * (K - 1) * M; i < K * (K - 1) * M; ++i) {
        cols.push_back(i);
        w.push_back(p.eta1);
      }
      for (int i = K * (K - 1) * M; i < T; ++i) {
        cols.push_back(i);
        w.push_back(1.0);
      }
    }
    p.eta2 = 1.0;
    p.Q = CMatrix::Zero(T, width);
    p.weights.resize(width);
    for (int j = 0; j < width; ++j) {
      p.Q(cols[j], j) = 1.0;
      p.weights(j) = w[j];
    }
    p.U = p.Q * p.weights.asDiagonal();
    out.push_back(std::move(p));
  }
  return out;
}

JointConstellation precode_construct(const std::vector<std::vector<CMatrix>>& sets,
                                     const std::vector<Precoder>& precoders, const std::vector<double>& powers,
                                     const ChannelConfig& config) {
  const std::size_t K = sets.size();
  if (precoders.size() != K || powers.size() != K) throw DimensionMismatch("one precoder and power per user required");
  JointConstellation c;
  c.config = config;
  c.config.K = static_cast<int>(K);
  c.config.P = *std::max_element(powers.begin(), powers.end());
  for (std::size_t k = 0; k < K; ++k) {
    UserConstellation u;
    u.power = powers[k];
    for (const auto& s : sets[k]) {
      if (s.rows() != precoders[k].U.cols()) throw DimensionMismatch("initial symbol has the wrong reduced dimension");
      const CMatrix v = precoders[k].U * s;
      Eigen::JacobiSVD<CMatrix> svd(v);
      const RVector& sv = svd.singularValues();
      if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-12 * std::max(1.0, sv(0)))
        throw InvalidInput("precoded symbol lost rank");
      u.symbols.push_back(std::sqrt(powers[k] * config.T) / v.norm() * v);
    }
    std::size_t b = 0;
    while ((std::size_t{1} << b) < u.size()) ++b;
    u.bits = (std::size_t{1} << b) == u.size() ? static_cast<int>(b) : -1;
    c.users.push_back(std::move(u));
  }
  return c;
}

std::vector<cd> qam_alphabet(int q) {
  const int L = static_cast<int>(std::lround(std::sqrt(static_cast<double>(q))));
  if (q < 4 || L * L != q) throw InvalidInput("QAM order must be a square of at least 4");
  const double scale = std::sqrt(2.0 * (q - 1) / 3.0);
  std::vector<cd> a;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) a.emplace_back((2 * i - (L - 1)) / scale, (2 * j - (L - 1)) / scale);
  return a;
}

JointConstellation pilot_based(int T, int K, int M, int qam_order, double P, int N) {
  if (K < 1 || M < 1) throw InvalidInput("K and M must be positive");
  if (T <= K * M) throw InvalidInput("pilot construction needs T > K M");
  if (!(P > 0.0)) throw InvalidInput("P must be positive");
  const auto alphabet = qam_alphabet(qam_order);
  const int rows = T - K * M;
  const int entries = rows * M;
  const double beta = P * T / (M * (T - K * M + 1.0));
  const double sb = std::sqrt(beta);
  std::size_t count = 1;
  for (int e = 0; e < entries; ++e) {
    count *= static_cast<std::size_t>(qam_order);
    if (count > (std::size_t{1} << 24)) throw InvalidInput("pilot constellation too large");
  }
  JointConstellation c;
  c.config.T = T;
  c.config.K = K;
  c.config.M.assign(K, M);
  c.config.N = N;
  c.config.P = P;
  const int bits = static_cast<int>(std::lround(std::log2(static_cast<double>(qam_order)))) * entries;
  for (int k = 0; k < K; ++k) {
    UserConstellation u;
    u.power = P;
    u.bits = bits;
    for (std::size_t n = 0; n < count; ++n) {
      CMatrix x = CMatrix::Zero(T, M);
      for (int m = 0; m < M; ++m) x(k * M + m, m) = sb;
      std::size_t digits = n;
      // most significant digit is the first data entry in row-major order
      for (int e = entries - 1; e >= 0; --e) {
        x(K * M + e / M, e % M) = sb * alphabet[digits % qam_order];
        digits /= qam_order;
      }
      u.symbols.push_back(std::move(x));
    }
    c.users.push_back(std::move(u));
  }
  return c;
}

}  // namespace ncmac
