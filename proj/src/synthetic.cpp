#include "ktemper/synthetic.hpp"

#include "ktemper/error.hpp"
#include "ktemper/random.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ktemper::synthetic {

KoopmanModel random_model(const RandomModelSpec& spec) {
    if (spec.lifted_dim == 0 || spec.horizon == 0 || spec.actions == 0) {
        throw ConfigError("random model dimensions must be positive");
    }
    RandomStream rng(spec.seed, 0xA11CE);
    const auto n = static_cast<Eigen::Index>(spec.lifted_dim);
    auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
        Matrix m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
        return m;
    };

    std::vector<Matrix> dynamics;
    std::vector<std::string> labels;
    for (std::size_t a = 0; a < spec.actions; ++a) {
        Eigen::HouseholderQR<Matrix> qr(gaussian(n, n));
        Matrix q = qr.householderQ() * Matrix::Identity(n, n);
        Vector scale(n);
        for (Eigen::Index i = 0; i < n; ++i) scale[i] = spec.spectral_bound * (0.9 + 0.1 * rng.uniform());
        dynamics.push_back(q * scale.asDiagonal());
        labels.push_back("u" + std::to_string(a));
    }
    Vector psi1 = gaussian(n, 1);
    psi1 /= psi1.norm();
    RowVector c = gaussian(1, n);

    KoopmanModel draft(labels, dynamics, c, psi1, spec.horizon);
    if (spec.normalize_cost) {
        std::vector<double> costs;
        for (int k = 0; k < 64; ++k) {
            std::vector<Action> steps(spec.horizon);
            for (auto& s : steps) s = rng.index(spec.actions);
            costs.push_back(cost(draft, ControlSequence(std::move(steps))));
        }
        double mean = 0.0;
        for (double v : costs) mean += v;
        mean /= static_cast<double>(costs.size());
        double var = 0.0;
        for (double v : costs) var += (v - mean) * (v - mean);
        const double spread = std::sqrt(var / static_cast<double>(costs.size()));
        if (spread > 0.0 && std::isfinite(spread)) c /= spread;
    }
    return KoopmanModel(std::move(labels), std::move(dynamics), std::move(c), std::move(psi1), spec.horizon);
}

double ToyCart::step(double position, Action a) {
    const double next = position + 0.15 * (static_cast<double>(a) - 1.0) + 0.1 * std::sin(std::numbers::pi * position);
    return std::clamp(next, -1.5, 1.5);
}

double ToyCart::cost(double position) {
    return (position - 0.6) * (position - 0.6);
}

edmd::ObservableBasis ToyCart::basis() {
    edmd::ObservableBasis basis;
    for (int j = 0; j < 9; ++j) basis.centers.push_back(Vector::Constant(1, -1.2 + 0.3 * j));
    basis.lambda = 8.0;
    basis.extra_affine = true;
    return basis;
}

edmd::TrajectoryDataset ToyCart::dataset(std::size_t trajectories, std::size_t length, std::uint64_t seed) {
    RandomStream rng(seed, 0xCA27);
    edmd::TrajectoryDataset data;
    data.action_count = action_count;
    for (std::size_t i = 0; i < trajectories; ++i) {
        edmd::Trajectory tr;
        double p = -1.0 + 2.0 * rng.uniform();
        tr.states.push_back(Vector::Constant(1, p));
        for (std::size_t k = 0; k < length; ++k) {
            const Action a = rng.index(action_count);
            p = step(p, a);
            tr.actions.push_back(a);
            tr.states.push_back(Vector::Constant(1, p));
        }
        data.trajectories.push_back(std::move(tr));
    }
    return data;
}

}  // namespace ktemper::synthetic
