#include "ncmac/model.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"

namespace ncmac {

int ChannelConfig::M_tot() const { return std::accumulate(M.begin(), M.end(), 0); }

int ChannelConfig::offset(int k) const { return std::accumulate(M.begin(), M.begin() + k, 0); }

void ChannelConfig::validate() const {
  if (T < 2) throw InvalidInput("T must be at least 2");
  if (K < 1) throw InvalidInput("K must be at least 1");
  if (static_cast<int>(M.size()) != K) throw DimensionMismatch("M must list one antenna count per user");
  for (int m : M)
    if (m < 1) throw InvalidInput("every M_k must be at least 1");
  if (N < 1) throw InvalidInput("N must be at least 1");
  if (!(P > 0.0) || !std::isfinite(P)) throw InvalidInput("P must be positive and finite");
  if (M_tot() > T) throw InvalidInput("sum of M_k must not exceed T");
}

double UserConstellation::average_power(int T) const {
  if (symbols.empty()) return 0.0;
  double s = 0.0;
  for (const auto& x : symbols) s += x.squaredNorm();
  return s / (static_cast<double>(T) * static_cast<double>(symbols.size()));
}

std::size_t JointConstellation::size() const {
  std::size_t n = 1;
  for (const auto& u : users) n *= u.size();
  return n;
}

JointIndex JointConstellation::unflatten(std::size_t flat) const {
  JointIndex idx(users.size());
  for (std::size_t k = users.size(); k-- > 0;) {
    idx[k] = flat % users[k].size();
    flat /= users[k].size();
  }
  return idx;
}

std::size_t JointConstellation::flatten(const JointIndex& idx) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < users.size(); ++k) flat = flat * users[k].size() + idx[k];
  return flat;
}

CMatrix JointConstellation::joint_symbol(const JointIndex& idx) const {
  CMatrix x(config.T, config.M_tot());
  int col = 0;
  for (std::size_t k = 0; k < users.size(); ++k) {
    const CMatrix& s = users[k].symbols[idx[k]];
    x.middleCols(col, s.cols()) = s;
    col += static_cast<int>(s.cols());
  }
  return x;
}

CMatrix JointConstellation::joint_symbol(std::size_t flat) const { return joint_symbol(unflatten(flat)); }

std::vector<CMatrix> JointConstellation::joint_symbols() const {
  std::vector<CMatrix> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(joint_symbol(i));
  return out;
}

std::vector<double> JointConstellation::powers() const {
  std::vector<double> p;
  for (const auto& u : users) p.push_back(u.power);
  return p;
}

void JointConstellation::validate(double tol) const {
  config.validate();
  if (static_cast<int>(users.size()) != config.K) throw DimensionMismatch("number of users differs from K");
  double pmax = 0.0;
  for (int k = 0; k < config.K; ++k) {
    const auto& u = users[k];
    std::ostringstream who;
    who << "user " << (k + 1);
    if (u.symbols.empty()) throw InvalidInput(who.str() + ": empty constellation");
    for (const auto& x : u.symbols) {
      if (x.rows() != config.T || x.cols() != config.M[k])
        throw DimensionMismatch(who.str() + ": symbol dimensions differ from T x M_k");
      require_finite(x, "symbol");
    }
    if (u.bits >= 0 && u.size() != (std::size_t{1} << u.bits))
      throw InvalidInput(who.str() + ": constellation size is not 2^bits");
    const double avg = u.average_power(config.T);
    if (std::abs(avg - u.power) > tol * std::max(u.power, 1e-300)) {
      std::ostringstream os;
      os << who.str() << ": average symbol power " << avg << " does not match declared power " << u.power;
      throw InvalidInput(os.str());
    }
    if (u.power > config.P * (1.0 + tol)) throw InvalidInput(who.str() + ": power exceeds the budget P");
    pmax = std::max(pmax, u.power);
  }
  if (std::abs(pmax - config.P) > tol * config.P)
    throw InvalidInput("largest user power must equal the budget P");
}

JointConstellation with_powers(const JointConstellation& c, const std::vector<double>& powers) {
  if (powers.size() != c.users.size()) throw DimensionMismatch("one power per user required");
  JointConstellation out = c;
  double pmax = 0.0;
  for (std::size_t k = 0; k < c.users.size(); ++k) {
    if (powers[k] < 0.0) throw InvalidInput("powers must be non-negative");
    if (!(c.users[k].power > 0.0)) throw InvalidInput("cannot rescale a user with zero power");
    const double f = std::sqrt(powers[k] / c.users[k].power);
    for (auto& x : out.users[k].symbols) x *= f;
    out.users[k].power = powers[k];
    pmax = std::max(pmax, powers[k]);
  }
  out.config.P = pmax;
  return out;
}

JointConstellation scaled_to_budget(const JointConstellation& c, double P) {
  std::vector<double> p = c.powers();
  const double r = P / c.config.P;
  for (auto& v : p) v *= r;
  JointConstellation out = with_powers(c, p);
  out.config.P = P;
  return out;
}

CMatrix signal_covariance(const CMatrix& x) {
  require_finite(x, "signal");
  CMatrix a = CMatrix::Identity(x.rows(), x.rows());
  a.noalias() += x * x.adjoint();
  return a;
}

double log_likelihood(const CMatrix& Y, const CMatrix& x) {
  if (Y.rows() != x.rows()) throw DimensionMismatch("Y and x must have T rows");
  const double T = static_cast<double>(x.rows());
  const double N = static_cast<double>(Y.cols());
  Eigen::LLT<CMatrix> llt(signal_covariance(x));
  const CMatrix l_inv_y = llt.matrixL().solve(Y);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) logdet += std::log(llt.matrixLLT()(i, i).real());
  logdet *= 2.0;
  return -l_inv_y.squaredNorm() - N * logdet - N * T * std::log(std::numbers::pi);
}

MlDetector::MlDetector(const JointConstellation& c, int N) : c_(&c), N_(N) {
  if (c.size() == 0) throw InvalidInput("constellation is empty");
  T_ = c.config.T;
  Mt_ = c.config.M_tot();
  count_ = c.size();
  W_.resize(static_cast<Eigen::Index>(count_) * Mt_, T_);
  logdet_.resize(count_);
  for (std::size_t i = 0; i < count_; ++i) {
    const CMatrix x = c.joint_symbol(i);
    CMatrix g = CMatrix::Identity(Mt_, Mt_);
    g.noalias() += x.adjoint() * x;
    Eigen::LLT<CMatrix> llt(g);
    double ld = 0.0;
    for (int j = 0; j < Mt_; ++j) ld += std::log(llt.matrixLLT()(j, j).real());
    logdet_[i] = 2.0 * ld;
    W_.middleRows(static_cast<Eigen::Index>(i) * Mt_, Mt_) = llt.matrixL().solve(x.adjoint());
  }
}

double MlDetector::log_likelihood(const CMatrix& Y, std::size_t i) const {
  const double quad = Y.squaredNorm() - (W_.middleRows(static_cast<Eigen::Index>(i) * Mt_, Mt_) * Y).squaredNorm();
  return -quad - N_ * logdet_[i] - N_ * T_ * std::log(std::numbers::pi);
}

std::size_t MlDetector::detect_flat(const CMatrix& Y) const {
  if (Y.rows() != T_ || Y.cols() != N_) throw DimensionMismatch("Y must be T x N");
  WY_.resize(W_.rows(), Y.cols());
  WY_.noalias() = W_ * Y;
  const double base = -Y.squaredNorm() - N_ * T_ * std::log(std::numbers::pi);
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count_; ++i) {
    const double ll = base + WY_.middleRows(static_cast<Eigen::Index>(i) * Mt_, Mt_).squaredNorm() - N_ * logdet_[i];
    // strict improvement beyond a relative tolerance, so exact ties keep the lowest index
    if (i == 0 || ll > best_ll + 1e-10 * std::max(1.0, std::abs(best_ll))) {
      best = i;
      best_ll = ll;
    }
  }
  return best;
}

JointIndex MlDetector::detect(const CMatrix& Y) const { return c_->unflatten(detect_flat(Y)); }

JointIndex ml_detect(const CMatrix& Y, const JointConstellation& c) {
  MlDetector det(c, static_cast<int>(Y.cols()));
  return det.detect(Y);
}

std::vector<std::pair<std::size_t, std::size_t>> check_identifiability(const JointConstellation& c, double tol) {
  if (tol < 0.0) throw InvalidInput("tolerance must be non-negative");
  std::vector<CMatrix> grams;
  grams.reserve(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CMatrix x = c.joint_symbol(i);
    grams.push_back(x * x.adjoint());
  }
  std::vector<std::pair<std::size_t, std::size_t>> bad;
  for (std::size_t i = 0; i < grams.size(); ++i)
    for (std::size_t j = i + 1; j < grams.size(); ++j)
      if ((grams[i] - grams[j]).norm() <= tol) bad.emplace_back(i, j);
  return bad;
}

CMatrix sample_channel_output(const CMatrix& x, int N, Rng& rng) {
  if (N < 1) throw InvalidInput("N must be at least 1");
  const CMatrix H = rng.complex_gaussian(N, static_cast<int>(x.cols()));
  CMatrix Y = rng.complex_gaussian(static_cast<int>(x.rows()), N);
  Y.noalias() += x * H.transpose();
  return Y;
}

TxCorrelationResult apply_tx_correlation(const JointConstellation& c, const CorrelationModel& model) {
  if (model.kind != CorrelationModel::Kind::TxPerUser)
    throw InvalidInput("transmit correlation requires a per-user model");
  if (static_cast<int>(model.matrices.size()) != c.config.K)
    throw DimensionMismatch("one correlation matrix per user required");
  TxCorrelationResult out{c, {}};
  double pmax = 0.0;
  for (int k = 0; k < c.config.K; ++k) {
    const CMatrix& psi = model.matrices[k];
    if (psi.rows() != c.config.M[k] || psi.cols() != c.config.M[k])
      throw DimensionMismatch("correlation matrix of user " + std::to_string(k + 1) + " must be M_k x M_k");
    const CMatrix half = hermitian_power(psi, 0.5);
    const CMatrix inv_half = hermitian_power(psi, -0.5);
    double mod = 0.0;
    auto& u = out.constellation.users[k];
    for (auto& x : u.symbols) {
      mod += (x * inv_half).squaredNorm();
      x = x * half;
    }
    out.modified_power.push_back(mod / static_cast<double>(u.size()));
    u.power = u.average_power(c.config.T);
    pmax = std::max(pmax, u.power);
  }
  out.constellation.config.P = pmax;
  return out;
}

CMatrix whiten_rx_correlation(const CMatrix& Y, const CorrelationModel& model) {
  if (model.kind != CorrelationModel::Kind::Rx || model.matrices.size() != 1)
    throw InvalidInput("receive whitening requires a single receive correlation matrix");
  const CMatrix& psi = model.matrices[0];
  if (psi.rows() != Y.cols()) throw DimensionMismatch("receive correlation must be N x N");
  return Y * hermitian_power(psi, -0.5);
}

}  // namespace ncmac
