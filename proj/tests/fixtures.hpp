#pragma once

// Small models and independent reference computations shared by the tests.

#include "ktemper/model.hpp"
#include "ktemper/synthetic.hpp"

#include <cmath>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fixtures {

using namespace ktemper;

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline RowVector row(std::initializer_list<double> values) {
    RowVector r(static_cast<Eigen::Index>(values.size()));
    Eigen::Index k = 0;
    for (double v : values) r[k++] = v;
    return r;
}

inline Vector col(std::initializer_list<double> values) { return row(values).transpose(); }

inline std::vector<std::string> labels(std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t a = 0; a < count; ++a) out.push_back("a" + std::to_string(a));
    return out;
}

/// T = horizon, every action a scalar multiplier, c = [1], psi1 = [1].
inline KoopmanModel scalar_model(const std::vector<double>& factors, std::size_t horizon = 1,
                                 std::optional<KoopmanModel::ActionMask> mask = {}) {
    std::vector<Matrix> dynamics;
    for (double f : factors) dynamics.push_back(scalar(f));
    return KoopmanModel(labels(factors.size()), dynamics, row({1.0}), col({1.0}), horizon, std::move(mask));
}

inline KoopmanModel identity_model(std::size_t n, std::size_t horizon, std::size_t actions, const RowVector& c,
                                   const Vector& psi1) {
    std::vector<Matrix> dynamics(actions, Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
    return KoopmanModel(labels(actions), dynamics, c, psi1, horizon);
}

inline KoopmanModel seeded(std::size_t n, std::size_t horizon, std::size_t actions, std::uint64_t seed) {
    synthetic::RandomModelSpec spec;
    spec.lifted_dim = n;
    spec.horizon = horizon;
    spec.actions = actions;
    spec.seed = seed;
    return synthetic::random_model(spec);
}

inline KoopmanModel with_cost_row(const KoopmanModel& m, const RowVector& c) {
    return KoopmanModel(m.actions(), m.dynamics(), c, m.initial_state(), m.horizon(), m.mask());
}

inline KoopmanModel with_horizon(const KoopmanModel& m, std::size_t horizon) {
    return KoopmanModel(m.actions(), m.dynamics(), m.cost_row(), m.initial_state(), horizon);
}

/// c * (A(u_T) ... A(u_1)) * psi1 with the full matrix product formed first,
/// accumulated in long double.
inline long double explicit_cost(const KoopmanModel& m, const std::vector<Action>& u) {
    using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const auto n = static_cast<Eigen::Index>(m.lifted_dim());
    LMatrix product = LMatrix::Identity(n, n);
    for (Action a : u) product = (m.dynamics(a).cast<long double>() * product).eval();
    const LMatrix c = m.cost_row().cast<long double>();
    const LMatrix psi = m.initial_state().cast<long double>();
    return (c * product * psi)(0, 0);
}

inline long double explicit_cost(const KoopmanModel& m, const ControlSequence& u) { return explicit_cost(m, u.steps); }

/// All feasible sequences by an odometer over the per-step allowed lists.
inline std::vector<std::vector<Action>> all_sequences(const KoopmanModel& m) {
    std::vector<std::vector<Action>> out;
    const std::size_t T = m.horizon();
    std::vector<std::size_t> digit(T, 0);
    while (true) {
        std::vector<Action> u(T);
        for (std::size_t t = 0; t < T; ++t) u[t] = m.allowed(t)[digit[t]];
        out.push_back(u);
        std::size_t t = T;
        while (t > 0) {
            --t;
            if (++digit[t] < m.allowed(t).size()) break;
            digit[t] = 0;
            if (t == 0) return out;
        }
        if (T == 0) return out;
    }
}

/// Boltzmann weights of the explicit costs, long double.
inline std::vector<long double> boltzmann_oracle(const std::vector<long double>& costs, double beta) {
    long double lo = costs.front();
    for (auto c : costs) lo = std::min(lo, c);
    std::vector<long double> p(costs.size());
    long double total = 0;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        p[i] = std::exp(-static_cast<long double>(beta) * (costs[i] - lo));
        total += p[i];
    }
    for (auto& v : p) v /= total;
    return p;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("ktemper_" + tag + "_" + std::to_string(static_cast<long>(::getpid())));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
