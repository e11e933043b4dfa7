#pragma once

#include "ktemper/model.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ktemper::edmd {

/// Radial observables phi_j(points) = sum_i exp(-lambda ||p_i - c_j||^2),
/// optionally followed by a constant 1.
struct ObservableBasis {
    std::vector<Vector> centers;
    double lambda = 1.0;
    bool extra_affine = false;

    std::size_t point_dim() const { return centers.empty() ? 0 : static_cast<std::size_t>(centers.front().size()); }
    std::size_t size() const { return centers.size() + (extra_affine ? 1 : 0); }
    /// Throws InputError.
    void validate() const;
};

/// Lifts an unordered set of points. Points are accumulated in
/// lexicographic order, so any permutation gives a bitwise identical result.
Vector lift(const ObservableBasis& basis, std::span<const Vector> points);

/// Lifts a raw state by splitting it into consecutive points of the
/// basis' point dimension.
Vector lift_state(const ObservableBasis& basis, const Vector& raw);

/// One trajectory: states.size() == actions.size() + 1.
struct Trajectory {
    std::vector<Vector> states;
    std::vector<Action> actions;
};

struct TrajectoryDataset {
    std::vector<Trajectory> trajectories;
    std::size_t action_count = 0;
    /// States are already lifted; fitting uses them as-is.
    bool prelifted = false;

    /// Throws InputError.
    void validate() const;
    std::size_t transition_count() const;
};

/// Which row vector c the fitted model gets.
struct CostSpec {
    /// Explicit row in lifted coordinates (length must match the lift).
    std::optional<RowVector> row;
    /// g(x) appended to the lifted state as its last coordinate; c then
    /// selects that coordinate. Takes precedence over `row`.
    std::function<double(const Vector&)> observable;
};

struct FitOptions {
    /// Pivots below tolerance * largest pivot count as rank deficiency.
    double rank_tolerance = 1e-10;
    std::size_t threads = 1;
};

struct FitResult {
    KoopmanModel model;
    std::vector<std::size_t> rank;         ///< per action
    std::vector<std::size_t> transitions;  ///< per action
    std::vector<double> residual;          ///< per action, sum of squared errors
    std::vector<std::string> warnings;
};

/// Full lifting used by fit_koopman: basis (or identity when the data is
/// prelifted) then the cost observable if one is given.
Vector lift_for_fit(const TrajectoryDataset& dataset, const ObservableBasis* basis, const CostSpec& cost,
                    const Vector& raw);

/// Per-action least squares  min_A sum ||psi_{t+1} - A psi_t||^2  over all
/// transitions taken with that action, via column-pivoted QR.
///
/// Throws FitError naming the action when it has fewer than n_psi
/// transitions. Rank deficiency only produces a warning.
FitResult fit_koopman(const TrajectoryDataset& dataset, const ObservableBasis* basis, const CostSpec& cost,
                      const Vector& initial_raw, std::size_t horizon, std::vector<std::string> action_labels = {},
                      const FitOptions& options = {});

}  // namespace ktemper::edmd
