#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ncmac/model.hpp"
#include "ncmac/rng.hpp"
#include "ncmac/types.hpp"

namespace ncmac {

enum class UstmMode { Random, Optimized };

// `size` orthonormal T x M matrices; power is set to M/T so the set validates
// as transmitted at that power.
UserConstellation ustm_single_user(int T, int M, std::size_t size, UstmMode mode, Rng& rng,
                                   std::vector<std::string>* warnings = nullptr);

// max over distinct pairs of ||a^H b||_F^2 / (||a||_F^2 ||b||_F^2); equals the
// (PT)^2-normalized coherence for equal-norm USTM symbols
double max_pair_coherence(const std::vector<CMatrix>& pool);

enum class PartitionStrategy { Random, GreedySwap };

// Splits `pool` into disjoint per-user subsets of the given sizes. Every user
// transmits at config.P with symbols sqrt(P T) s / ||s||_F.
JointConstellation partition_construct(const std::vector<CMatrix>& pool, const ChannelConfig& config,
                                       const std::vector<std::size_t>& sizes, PartitionStrategy strategy,
                                       Rng& rng);

struct PartitionFeasibility {
  bool asymptotic = false;
  double phi = 0.0;
  double alpha = 0.0;
  double c_threshold = 0.0;        // coherence below which the guarantee grows with P
  double delta_requirement = 0.0;  // minimum chordal distance of the single-user set
  double cardinality_bound = 0.0;
  double log2_cardinality_bound = 0.0;
  double kappa = 0.0;
  double nu = 0.0;
  double beta = 0.0;
  double log2_beta = 0.0;
  double zeta = 0.0;
};

// P empty: high-SNR limit. Throws Unsupported when kappa or beta does not fit
// in a double.
PartitionFeasibility partition_feasibility(int T, int K, int M, std::optional<double> P = std::nullopt);

double phi_K(int K);
double kappa_TM(int T, int M);
double log2_kappa_TM(int T, int M);
double nu_KM(int K, int M);
double zeta_KM(int K, int M);
double log2_beta_TKM(int T, int K, int M);

// d_min lower bound of a partitioned constellation with coherence c
double partition_dmin_bound(int K, double P, int T, int M, double c);

enum class PrecoderType { I, II };

struct Precoder {
  CMatrix U;  // T x (T - (K-1) M)
  CMatrix Q;  // orthonormal columns, U = Q diag(weights)
  RVector weights;
  double eta1 = 1.0, eta2 = 1.0;
};

std::vector<Precoder> build_precoder(int T, int K, int M, PrecoderType type);

JointConstellation precode_construct(const std::vector<std::vector<CMatrix>>& sets,
                                     const std::vector<Precoder>& precoders, const std::vector<double>& powers,
                                     const ChannelConfig& config);

// Orthogonal pilots followed by spatially multiplexed q-QAM data.
JointConstellation pilot_based(int T, int K, int M, int qam_order, double P, int N = 1);

// unit-average-energy square QAM alphabet
std::vector<cd> qam_alphabet(int q);

}  // namespace ncmac
