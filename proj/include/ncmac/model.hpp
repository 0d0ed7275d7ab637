#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ncmac/rng.hpp"
#include "ncmac/types.hpp"

namespace ncmac {

struct ChannelConfig {
  int T = 2;
  int K = 1;
  std::vector<int> M{1};
  int N = 1;
  double P = 1.0;

  int M_tot() const;
  // column offset of user k inside the joint symbol
  int offset(int k) const;
  void validate() const;
};

struct UserConstellation {
  std::vector<CMatrix> symbols;
  double power = 1.0;
  int bits = -1;  // -1: not declared

  std::size_t size() const { return symbols.size(); }
  double average_power(int T) const;
};

using JointIndex = std::vector<std::size_t>;

struct JointConstellation {
  ChannelConfig config;
  std::vector<UserConstellation> users;

  std::size_t size() const;
  // mixed radix, user 1 most significant
  JointIndex unflatten(std::size_t flat) const;
  std::size_t flatten(const JointIndex& idx) const;
  CMatrix joint_symbol(const JointIndex& idx) const;
  CMatrix joint_symbol(std::size_t flat) const;
  std::vector<CMatrix> joint_symbols() const;
  std::vector<double> powers() const;

  // Throws InvalidInput naming the first violated invariant.
  void validate(double tol = 1e-6) const;
};

// Rescale every user so that user k has power powers[k]. Users whose current
// power is zero cannot be rescaled.
JointConstellation with_powers(const JointConstellation& c, const std::vector<double>& powers);
// Scale all users by the common factor that moves the budget to P.
JointConstellation scaled_to_budget(const JointConstellation& c, double P);

CMatrix signal_covariance(const CMatrix& x);

double log_likelihood(const CMatrix& Y, const CMatrix& x);

// Precomputes the per-candidate quantities of the ML metric.
class MlDetector {
 public:
  MlDetector(const JointConstellation& c, int N);
  std::size_t detect_flat(const CMatrix& Y) const;
  JointIndex detect(const CMatrix& Y) const;
  // log likelihood of candidate i
  double log_likelihood(const CMatrix& Y, std::size_t i) const;

 private:
  const JointConstellation* c_;
  int T_ = 0, N_ = 0, Mt_ = 0;
  std::size_t count_ = 0;
  CMatrix W_;                   // stacked L^{-1} x^H, (count*Mt) x T
  std::vector<double> logdet_;  // ln det(I + x x^H)
  mutable CMatrix WY_;
};

JointIndex ml_detect(const CMatrix& Y, const JointConstellation& c);

std::vector<std::pair<std::size_t, std::size_t>> check_identifiability(const JointConstellation& c,
                                                                        double tol);

CMatrix sample_channel_output(const CMatrix& x, int N, Rng& rng);

struct CorrelationModel {
  enum class Kind { TxPerUser, Rx };
  Kind kind = Kind::TxPerUser;
  std::vector<CMatrix> matrices;
};

struct TxCorrelationResult {
  JointConstellation constellation;
  // (1/|X_k|) sum ||x_k Psi_k^{-1/2}||_F^2 over the input symbols
  std::vector<double> modified_power;
};

TxCorrelationResult apply_tx_correlation(const JointConstellation& c, const CorrelationModel& model);

CMatrix whiten_rx_correlation(const CMatrix& Y, const CorrelationModel& model);

}  // namespace ncmac
