#pragma once

#include "ktemper/model.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ktemper::baselines {

/// Simplex weights mu_u(t); rows are steps, columns actions. Masked-out
/// actions carry weight 0.
struct RelaxedControls {
    Matrix mu;
};

/// Throws InputError if a row leaves the simplex by more than 1e-9 or puts
/// weight on a masked action.
void validate(const KoopmanModel& model, const RelaxedControls& controls);

/// Every row uniform over the admissible actions.
RelaxedControls centroid(const KoopmanModel& model);

/// Vertex of the relaxation encoding a discrete sequence.
RelaxedControls one_hot(const KoopmanModel& model, const ControlSequence& u);

/// c psi_T with psi_{t+1} = sum_u mu_u(t) A(u) psi_t, applied as a weighted
/// sum of |U| matrix-vector products per step.
double relaxed_cost(const KoopmanModel& model, const RelaxedControls& controls);

/// The same multilinear polynomial for any weights (no simplex check).
double mixed_cost(const KoopmanModel& model, const Matrix& mu);

/// dJ/dmu_u(t) = cbar_{t+1} A(u) psi_t with the mixed-dynamics forward
/// states psi_t and backward rows cbar.
Matrix relaxed_gradient(const KoopmanModel& model, const RelaxedControls& controls);

/// Euclidean projection onto {w >= 0, sum w = 1} (sort and threshold).
Vector project_simplex(const Vector& v);

/// Per-row argmax, ties to the lowest admissible action.
ControlSequence round_to_sequence(const KoopmanModel& model, const RelaxedControls& controls);

struct GradientConfig {
    double eta = 0.5;
    std::size_t iterations = 200;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;
    /// Uniform jitter added to the centroid before the first projection;
    /// 0 keeps the deterministic centroid start.
    double init_jitter = 0.0;
};

struct GradientResult {
    RelaxedControls mu;  ///< best iterate by relaxed cost
    double relaxed = 0.0;
    ControlSequence rounded;
    double rounded_cost = 0.0;
    std::vector<double> relaxed_history;  ///< index 0 = start
    std::vector<double> rounded_history;  ///< discrete cost of each iterate's rounding
    double wall_time = 0.0;
};

/// Projected Nesterov-accelerated Adam on the continuous relaxation. The
/// moments are fed the gradient with its per-row mean removed.
/// Throws NumericError if the relaxed cost becomes non-finite.
GradientResult gradient_solve(const KoopmanModel& model, const GradientConfig& config = {});

struct GAConfig {
    std::size_t population = 50;
    std::size_t selection_mu = 2;
    bool single_point_crossover = true;
    double mutation_rate = 0.10;
    double gene_mutation_prob = 0.05;
    std::size_t generations = 100;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    /// Throws ConfigError.
    void validate() const;
};

struct GAResult {
    ControlSequence best;
    double best_cost = 0.0;
    std::vector<double> history;          ///< best-ever cost, index 0 = initial population
    std::vector<double> generation_best;  ///< best of each population
    double wall_time = 0.0;
};

/// Genetic algorithm: uniform ranking over the best selection_mu
/// individuals, single-point crossover of two independently drawn parents,
/// per-individual mutation with per-gene uniform resampling, and the single
/// best individual carried over unchanged.
GAResult genetic_solve(const KoopmanModel& model, const GAConfig& config = {});

}  // namespace ktemper::baselines
