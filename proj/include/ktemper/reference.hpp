#pragma once

#include "ktemper/sampler.hpp"

namespace ktemper::reference {

/// Serial reference for ktemper::gibbs_sweep.
///
/// Evaluates every candidate of every step with a fresh cost() rollout
/// (O(T^2 |U|) products per sweep) and consumes the random stream exactly
/// like the cached kernel, so both produce the same chain.
void gibbs_sweep(const KoopmanModel& model, Replica& replica, RandomStream& rng,
                 const SweepObserver& observer = {});

/// Conditional pmf of step t computed from full rollouts with every other
/// step of u frozen.
std::vector<double> naive_conditional(const KoopmanModel& model, const ControlSequence& u, std::size_t step,
                                      double beta);

}  // namespace ktemper::reference
