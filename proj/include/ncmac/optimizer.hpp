#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ncmac/metrics.hpp"
#include "ncmac/model.hpp"
#include "ncmac/rng.hpp"
#include "ncmac/types.hpp"

namespace ncmac {

// Smooth objective over a product of Grassmann manifolds, to be minimized.
class Objective {
 public:
  virtual ~Objective() = default;
  // Returns the value; fills the Euclidean gradient when egrad is non-null and
  // the unsmoothed extremal metric when extremum is non-null.
  virtual double evaluate(const PointSet& s, PointSet* egrad, double* extremum = nullptr) const = 0;
};

// Smoothed design metric of the joint constellation x_k = sqrt(P_k T / M_k) s_k.
// Supported kinds: J(1/2), d, e, m1, m2(N).
class MetricObjective : public Objective {
 public:
  MetricObjective(MetricKind kind, int T, std::vector<int> M, std::vector<double> powers, double epsilon);
  double evaluate(const PointSet& s, PointSet* egrad, double* extremum = nullptr) const override;

  const MetricKind& kind() const { return kind_; }
  JointConstellation to_constellation(const PointSet& s, int N = 1) const;

 private:
  MetricKind kind_;
  int T_;
  std::vector<int> M_;
  std::vector<double> powers_;
  std::vector<double> rho_;
  double epsilon_;
};

// sum over points of Re tr(s^H H s); a plumbing hook for gradient checks
class QuadraticObjective : public Objective {
 public:
  explicit QuadraticObjective(CMatrix H) : H_(std::move(H)) {}
  double evaluate(const PointSet& s, PointSet* egrad, double* extremum = nullptr) const override;

 private:
  CMatrix H_;
};

struct OptimizerOptions {
  double epsilon = 0.1;
  int max_iters = 1000;
  double grad_tol = 1e-6;
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 50;
  bool powell_restart = true;
  double powell_threshold = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
};

struct OptimizerState {
  PointSet points;
  PointSet direction;
  PointSet gradient;  // Riemannian
  std::vector<double> trace;  // accepted objective values, starting with the initial one
  std::vector<double> grad_norms;
  std::vector<double> steps;
  int iterations = 0;
  int restarts = 0;
  std::string stop_reason;
  std::vector<std::string> diagnostics;
};

using TraceCallback = std::function<void(int iter, double objective, double grad_norm, double step)>;

CMatrix riemannian_grad(const CMatrix& euclid_grad, const CMatrix& point);
// polar retraction; step 0 returns the point unchanged
CMatrix retract(const CMatrix& point, const CMatrix& tangent, double step);

// Euclidean gradient block of point (k, n) of the smoothed objective
CMatrix euclidean_grad(const MetricKind& kind, const PointSet& s, int T, const std::vector<int>& M,
                       const std::vector<double>& powers, double epsilon, int k, int n);

// active[k] == false freezes user k; empty means all users are active
OptimizerState cg_optimize(const Objective& obj, const PointSet& init, const OptimizerOptions& options,
                           const std::vector<bool>& active = {}, const TraceCallback& trace = {});

// worst relative error between central differences along retraction curves
// and the Riemannian gradient, over `directions` random tangent directions
double grad_check(const Objective& obj, const PointSet& s, double h, Rng& rng, int directions = 4);

PointSet random_points(int T, const std::vector<int>& M, const std::vector<std::size_t>& sizes, Rng& rng);
// orthonormal direction of every symbol (polar factor)
PointSet points_from_constellation(const JointConstellation& c);

struct InitSpec {
  enum class Kind { Precoding, Partitioning, Pilot, Random };
  Kind kind = Kind::Random;
  int count = 1;
  // "precoding,partitioning,pilot,random:3"
  static std::vector<InitSpec> parse_list(const std::string& text);
  std::string label() const;
};

struct RunSummary {
  std::string label;
  double initial_metric = 0.0;
  double final_metric = 0.0;
  int iterations = 0;
  std::string stop_reason;
};

struct MultiStartResult {
  JointConstellation best;
  double best_metric = 0.0;
  std::size_t best_run = 0;
  std::vector<RunSummary> runs;
  std::vector<std::string> warnings;
};

// Every user transmits at config.P. bits[k] gives 2^bits[k] symbols.
MultiStartResult multi_start_optimize(const MetricKind& kind, const ChannelConfig& config,
                                      const std::vector<int>& bits, const std::vector<InitSpec>& inits,
                                      const OptimizerOptions& options, const TraceCallback& trace = {});

struct AlternatingResult {
  JointConstellation constellation;
  std::vector<double> metric_trace;  // true metric after each cycle, starting with the initial one
  int cycles = 0;
  int rejected_steps = 0;
};

AlternatingResult alternating_optimize(const MetricKind& kind, const ChannelConfig& config,
                                       const std::vector<int>& bits, const OptimizerOptions& options,
                                       int max_cycles = 10, const PointSet* init = nullptr,
                                       const TraceCallback& trace = {});

// unsmoothed metric, oriented so that larger is better
double oriented_metric(const MetricKind& kind, double value);

}  // namespace ncmac
