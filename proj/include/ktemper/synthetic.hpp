#pragma once

// Seeded model generators used by tests, the acceptance suite and the
// benchmark harness.

#include "ktemper/edmd.hpp"
#include "ktemper/model.hpp"

#include <cstddef>
#include <cstdint>

namespace ktemper::synthetic {

struct RandomModelSpec {
    std::size_t lifted_dim = 4;
    std::size_t horizon = 8;
    std::size_t actions = 3;
    std::uint64_t seed = 0;
    /// Every A(u) = Q_u D_u with Q_u orthogonal and D_u diagonal in
    /// [0.9, 1] * spectral_bound, so ||A(u)||_2 <= spectral_bound.
    double spectral_bound = 1.0;
    /// Rescale c so that costs of random sequences have unit spread.
    bool normalize_cost = true;
};

KoopmanModel random_model(const RandomModelSpec& spec);

/// Scripted one-dimensional cart: position p, actions {left, stay, right},
///   p' = clamp(p + 0.15 (a - 1) + 0.1 sin(pi p), -1.5, 1.5),
/// with cost g(p) = (p - 0.6)^2.
struct ToyCart {
    static constexpr std::size_t action_count = 3;
    static double step(double position, Action a);
    static double cost(double position);
    /// 9 radial centers on [-1.2, 1.2], lambda = 8, affine term.
    static edmd::ObservableBasis basis();
    /// Random-input trajectories starting uniformly in [-1, 1].
    static edmd::TrajectoryDataset dataset(std::size_t trajectories, std::size_t length, std::uint64_t seed);
};

}  // namespace ktemper::synthetic
