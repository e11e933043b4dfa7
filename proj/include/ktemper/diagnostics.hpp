#pragma once

// Desk-scale verification tools. Everything here enumerates the feasible
// set exhaustively, in lexicographic order of the per-step admissible
// action lists (step 0 most significant).

#include "ktemper/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ktemper::diagnostics {

inline constexpr std::size_t kDefaultEnumerationCap = 10'000'000;
/// Dense kernels store |states|^2 doubles.
inline constexpr std::size_t kDefaultKernelCap = 4096;

/// Throws EnumerationRefused when sequence_count(model) > cap; otherwise
/// returns the count.
std::size_t checked_state_count(const KoopmanModel& model, std::size_t cap);

/// All feasible sequences, lexicographic.
std::vector<ControlSequence> enumerate_sequences(const KoopmanModel& model,
                                                 std::size_t cap = kDefaultEnumerationCap);

/// Costs of all feasible sequences in enumeration order, computed by a
/// depth-first walk that shares prefixes.
std::vector<double> enumerate_costs(const KoopmanModel& model, std::size_t cap = kDefaultEnumerationCap);

struct MinimumResult {
    double j_star = 0.0;
    std::vector<ControlSequence> minimizers;  ///< within 1e-12 of j_star
};

MinimumResult brute_force_min(const KoopmanModel& model, std::size_t cap = kDefaultEnumerationCap);

struct BoltzmannDistribution {
    std::vector<ControlSequence> states;
    std::vector<double> costs;
    Vector probs;
    double beta = 0.0;
    double log_partition = 0.0;
    double partition = 0.0;  ///< may overflow to inf; log_partition does not
};

/// p(u; beta) = exp(-beta J(u)) / Q(beta) over every feasible sequence.
BoltzmannDistribution boltzmann(const KoopmanModel& model, double beta, std::size_t cap = kDefaultEnumerationCap);

struct TransitionMatrix {
    std::vector<ControlSequence> states;
    Matrix P;  ///< row = from, column = to
};

/// Exact single-step Gibbs kernel P_t for step t (0-based).
TransitionMatrix gibbs_kernel(const KoopmanModel& model, double beta, std::size_t step,
                              std::size_t cap = kDefaultKernelCap);

/// P_sweep = P_0 P_1 ... P_{T-1}.
TransitionMatrix sweep_kernel(const KoopmanModel& model, double beta, std::size_t cap = kDefaultKernelCap);

/// Joint kernel of one tempering iteration over M rungs: independent sweeps
/// at every rung followed by the sequential exchange pass. Joint states are
/// tuples (s_0, ..., s_{M-1}) indexed with rung 0 most significant.
Matrix tempering_kernel(const KoopmanModel& model, std::span<const double> betas,
                        std::size_t cap = kDefaultKernelCap);

/// Product of the per-rung Boltzmann distributions, same indexing.
Vector tempering_joint_distribution(const KoopmanModel& model, std::span<const double> betas,
                                    std::size_t cap = kDefaultKernelCap);

/// True iff some power of P is strictly positive (irreducible + aperiodic).
bool is_regular(const Matrix& P);

/// Unique pi with pi P = pi, sum 1, pi >= 0. Dense solve up to 4096
/// states, power iteration beyond. Throws InputError if P is not regular.
Vector stationary_distribution(const Matrix& P);
inline Vector stationary_distribution(const TransitionMatrix& kernel) { return stationary_distribution(kernel.P); }

/// max_{u,u'} |P(u,u') pi(u) - P(u',u) pi(u')|.
double detailed_balance_residual(const Matrix& P, const Vector& pi);

/// || pi P - pi ||_1.
double global_balance_residual(const Matrix& P, const Vector& pi);

/// || p P^k - pi ||_1 for k = 1 .. steps.
std::vector<double> convergence_profile(const Matrix& P, const Vector& start, const Vector& pi, std::size_t steps);

struct HoffmanBound {
    double p_max = 0.0;
    double p_min = 0.0;
    double lambda_bound = 0.0;  ///< (p_max - p_min) / (p_max + p_min)
    double mixing_bound = 0.0;  ///< (p_max + p_min) / (2 p_min), inf if p_min = 0
};

HoffmanBound hoffman_bound(const Matrix& P);

struct SampleComplexity {
    double beta_required = 0.0;
    /// Number of independent samples; empty when infeasible at the given beta.
    std::optional<std::uint64_t> samples;
};

/// Samples needed so that all N independent Boltzmann draws land at least
/// epsilon above the optimum with probability at most delta:
///   beta >= ln(|U|/|U*|)/epsilon,  N >= ln(1/delta) / (beta epsilon - ln(|U|/|U*|)).
SampleComplexity sample_complexity(const BigInt& space_size, const BigInt& optimal_size, double epsilon, double delta,
                                   double beta);

/// Natural log of a positive big integer.
double log_big(const BigInt& value);

}  // namespace ktemper::diagnostics
