#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ncmac/model.hpp"
#include "ncmac/types.hpp"

namespace ncmac {

struct EigenSpectrum {
  RVector lambdas;  // descending, strictly positive
};

// Spectrum of (I + x x^H)(I + x' x'^H)^{-1}
EigenSpectrum gamma_spectrum(const CMatrix& x, const CMatrix& xp);

double metric_b(const CMatrix& x, const CMatrix& xp);
double riemannian_distance(const CMatrix& x, const CMatrix& xp);
double metric_J(const CMatrix& x, const CMatrix& xp, double s);
double relaxed_bound(const CMatrix& x, const CMatrix& xp);
double metric_d(const CMatrix& x, const CMatrix& xp);  // d(x -> x')
double metric_e(const CMatrix& x, const CMatrix& xp);  // e(x -> x')
double pair_m1(const CMatrix& x, const CMatrix& xp);
// ln |det(I - w x x^H x' x'^H)|; -inf for a singular determinant, so the pair
// contributes +inf to m2. For even N, |det|^-N equals det^-N.
double pair_m2_logdet(const CMatrix& x, const CMatrix& xp);

// Same quantities from a spectrum
double b_from_spectrum(const RVector& l);
double riemannian_from_spectrum(const RVector& l);
double J_from_spectrum(const RVector& l, double s);
double relaxed_from_spectrum(const RVector& l);
double e_from_spectrum(const RVector& l);

struct MetricKind {
  enum class Type { B, Riemannian, J, Relaxed, D, Dk, E, M1, M2, Coherence };
  Type type = Type::B;
  double s = 0.5;  // J only
  int N = 4;       // m2 only

  static MetricKind b() { return {Type::B}; }
  static MetricKind J(double s = 0.5) { return {Type::J, s}; }
  static MetricKind d() { return {Type::D}; }
  static MetricKind e() { return {Type::E}; }
  static MetricKind m1() { return {Type::M1}; }
  static MetricKind m2(int N) { return {Type::M2, 0.5, N}; }

  // "b", "riemannian", "J:0.5", "relaxed", "d", "dk", "e", "m1", "m2:4", "coherence"
  static MetricKind parse(const std::string& text);
  std::string name() const;
  std::string param() const;
  std::string label() const;

  // larger value means a better constellation
  bool higher_is_better() const;
  // pair value depends on the order of the pair
  bool ordered() const;
  void validate() const;
};

struct MetricReport {
  MetricKind kind;
  double value = 0.0;
  // Joint flat indices of the extremal pair. For coherence these are indices
  // into the per-user symbol lists concatenated in user order.
  std::size_t arg_i = 0, arg_j = 0;
  // Per-pair values: unordered pairs (i < j) row-major for symmetric kinds,
  // ordered pairs (i != j) row-major otherwise. For m2 these are the
  // log-determinants of the unordered pairs.
  std::vector<double> pair_values;
  std::vector<double> powers;
  std::vector<std::string> diagnostics;
};

MetricReport evaluate_metric(const MetricKind& kind, const JointConstellation& c, bool keep_pairs = false);

MetricReport b_min(const JointConstellation& c, bool keep_pairs = false);
MetricReport J_min(const JointConstellation& c, double s, bool keep_pairs = false);
MetricReport d_min(const JointConstellation& c, bool keep_pairs = false);
MetricReport e_min(const JointConstellation& c, bool keep_pairs = false);
MetricReport metric_m1(const JointConstellation& c, bool keep_pairs = false);
MetricReport metric_m2(const JointConstellation& c, int N, bool keep_pairs = false);
MetricReport cross_coherence(const JointConstellation& c);

// k is 0-based. Throws InvalidInput when user k has fewer than two symbols.
double metric_d_k(const JointConstellation& c, int k);
MetricReport min_k_d(const JointConstellation& c);

// epsilon * ln sum exp(-f/epsilon) for max-min kinds, epsilon * ln sum exp(f/epsilon)
// for m1; m2 is returned as is.
double smoothed_objective(const MetricKind& kind, const JointConstellation& c, double epsilon);

// ln sum exp(v), shifted by the maximum
double log_sum_exp(const std::vector<double>& v);

}  // namespace ncmac
