#pragma once

#include "ktemper/error.hpp"
#include "ktemper/model.hpp"
#include "ktemper/random.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ktemper {

/// Inverse temperatures beta_1 < ... < beta_M, hottest first.
class TemperatureLadder {
public:
    TemperatureLadder() = default;
    /// Throws ConfigError unless strictly increasing, finite and positive.
    /// A single rung may be zero (plain uniform sampling, for diagnostics).
    explicit TemperatureLadder(std::vector<double> betas);

    std::size_t size() const { return betas_.size(); }
    double operator[](std::size_t j) const { return betas_[j]; }
    const std::vector<double>& betas() const { return betas_; }

private:
    std::vector<double> betas_;
};

/// M geometrically spaced inverse temperatures from beta_min to beta_max.
TemperatureLadder make_log_ladder(double beta_min, double beta_max, std::size_t count);

/// One temperature slot's chain state.
///
/// Cache layout (0-based steps t = 0..T-1):
///   x_cache[t] = A(u_{t-1}) ... A(u_0) psi_1       (x_cache[0] = psi_1)
///   c_cache[t] = c A(u_{T-1}) ... A(u_t)           (c_cache[T] = c)
/// so c_cache[t] . x_cache[t] = J(u) for every t in 0..T, and the energy of
/// candidate a at step t is c_cache[t+1] A(a) x_cache[t].
struct Replica {
    double beta = 0.0;
    ControlSequence u;
    std::vector<Vector> x_cache;
    std::vector<RowVector> c_cache;
    double current_cost = 0.0;
    /// Matrix-vector products performed by sweeps on this slot.
    std::uint64_t matvec_count = 0;
};

/// Builds a replica with consistent caches for u (setup work is not counted).
Replica make_replica(const KoopmanModel& model, double beta, ControlSequence u);

/// Recomputes both caches and current_cost from scratch for replica.u.
void rebuild_caches(const KoopmanModel& model, Replica& replica);

/// A sequence drawn uniformly from the feasible set.
ControlSequence random_sequence(const KoopmanModel& model, RandomStream& rng);

/// Boltzmann conditional of one step:
///   p(a) proportional to exp(-beta * c_next A(a) x),  a in allowed,
/// where c_next is the backward cache after the step and x the state
/// entering it. Max-subtracted, so every exponent is <= 0.
/// Throws NumericError (carrying the action) on a non-finite energy.
std::vector<double> conditional_pmf(const RowVector& c_next, const Vector& x, double beta,
                                    std::span<const Action> allowed, const KoopmanModel& model);

/// Turns energies into Boltzmann probabilities in place (max-subtraction,
/// exponent clamp at -700). Throws NumericError on a non-finite energy.
void boltzmann_from_energies(std::span<double> energies_to_probs, double beta, std::span<const Action> allowed);

/// Called once per step of a sweep with the sequence as it stands before the
/// step is resampled and the conditional used to resample it.
using SweepObserver =
    std::function<void(std::size_t step, const ControlSequence& current, std::span<const double> pmf)>;

/// One Gibbs variable sweep using the linear-cost cache recursions.
///
/// Forward over t: sample u_t from the conditional (|U_t| products), then
/// advance x_cache[t+1] = A(u_t) x_cache[t] (one product). Afterwards the
/// backward cache is rebuilt for the new sequence (T products), which is
/// exactly the backward pass the next sweep needs. Work: T(|U| + 2)
/// matrix-vector products.
void gibbs_sweep(const KoopmanModel& model, Replica& replica, RandomStream& rng,
                 const SweepObserver& observer = {});

/// Swap acceptance between adjacent rungs, beta_lo < beta_hi:
///   min{ exp((beta_hi - beta_lo) (J_hi - J_lo)), 1 }.
/// Exactly 1 whenever J_lo <= J_hi. Throws NumericError on non-finite input.
double flip_probability(double beta_lo, double beta_hi, double cost_lo, double cost_hi);

/// Sequential exchange pass over pairs (0,1), (1,2), ...; each pair sees the
/// result of the previous one. Swaps everything except beta. Returns one
/// flag per pair. One uniform variate is drawn per pair.
std::vector<bool> tempering_sweep(std::span<Replica> replicas, RandomStream& rng);

enum class SweepKernel {
    cached,     ///< recursion kernel, replicas in parallel
    reference,  ///< naive full-cost evaluation, strictly serial
};

/// Step (a) of one tempering iteration: one sweep per rung. The cached
/// kernel spreads rungs over `threads` OpenMP workers; the reference kernel
/// always runs serially. Rung j uses streams[j]. Rethrows the NumericError
/// of the lowest failing rung after every rung has finished.
void sweep_all(const KoopmanModel& model, std::span<Replica> replicas, std::span<RandomStream> streams,
               SweepKernel kernel, std::size_t threads);

struct SamplerConfig {
    TemperatureLadder ladder;
    std::size_t sweeps = 1000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t trace_every = 1;
    SweepKernel kernel = SweepKernel::cached;

    /// Throws ConfigError.
    void validate() const;
};

struct TraceRecord {
    std::size_t sweep_index = 0;  ///< 1-based
    std::vector<double> per_replica_cost;
    std::vector<double> per_replica_best;  ///< running minimum per rung
    std::vector<bool> flips_this_sweep;    ///< M-1 entries
};

struct SolveResult {
    double best_cost = 0.0;
    ControlSequence best_sequence;
    std::size_t best_found_at_sweep = 0;  ///< 0 = initial draw
    std::vector<TraceRecord> trace;
    std::vector<std::size_t> flip_counts;  ///< per adjacent pair
    std::size_t sweep_count = 0;
    double wall_time = 0.0;  ///< seconds
    std::uint64_t matvec_count = 0;
};

/// Thrown when a sweep hits a non-finite energy; carries what ran so far.
class SolveAborted : public NumericError {
public:
    SolveAborted(const NumericError& cause, SolveResult partial)
        : NumericError(cause.what(), cause.action()), partial_(std::move(partial)) {}
    const SolveResult& partial() const { return partial_; }

private:
    SolveResult partial_;
};

/// Gibbs sampling with parallel tempering.
///
/// Every rung starts from an independent uniform sequence. Each iteration
/// runs one Gibbs sweep per rung (in parallel) and then a tempering sweep.
/// Rung j draws from stream (seed, j); the exchange pass from (seed, M+1),
/// so the result is bit-identical for any thread count. The best sequence
/// is the lowest cost seen at any rung after any sweep, first seen winning.
SolveResult solve(const KoopmanModel& model, const SamplerConfig& config);

}  // namespace ktemper
