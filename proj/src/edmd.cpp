#include "ktemper/edmd.hpp"

#include "ktemper/error.hpp"

#include <Eigen/QR>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

namespace ktemper::edmd {

void ObservableBasis::validate() const {
    if (centers.empty()) throw InputError("observable basis has no centers");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("observable width lambda must be positive");
    const auto dim = centers.front().size();
    if (dim == 0) throw InputError("observable centers must have positive dimension");
    for (const auto& c : centers) {
        if (c.size() != dim) throw InputError("observable centers have mixed dimensions");
    }
}

Vector lift(const ObservableBasis& basis, std::span<const Vector> points) {
    basis.validate();
    const auto dim = static_cast<Eigen::Index>(basis.point_dim());
    std::vector<const Vector*> order;
    order.reserve(points.size());
    for (const auto& p : points) {
        if (p.size() != dim) {
            std::ostringstream os;
            os << "point of dimension " << p.size() << " does not match basis dimension " << dim;
            throw InputError(os.str());
        }
        order.push_back(&p);
    }
    std::sort(order.begin(), order.end(), [](const Vector* a, const Vector* b) {
        return std::lexicographical_compare(a->begin(), a->end(), b->begin(), b->end());
    });

    Vector psi = Vector::Zero(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.centers.size(); ++j) {
        double sum = 0.0;
        for (const Vector* p : order) sum += std::exp(-basis.lambda * (*p - basis.centers[j]).squaredNorm());
        psi[static_cast<Eigen::Index>(j)] = sum;
    }
    if (basis.extra_affine) psi[psi.size() - 1] = 1.0;
    return psi;
}

Vector lift_state(const ObservableBasis& basis, const Vector& raw) {
    basis.validate();
    const auto dim = static_cast<Eigen::Index>(basis.point_dim());
    if (raw.size() == 0 || raw.size() % dim != 0) {
        std::ostringstream os;
        os << "raw state of length " << raw.size() << " is not a whole number of " << dim << "-dimensional points";
        throw InputError(os.str());
    }
    std::vector<Vector> points;
    for (Eigen::Index k = 0; k < raw.size(); k += dim) points.push_back(raw.segment(k, dim));
    return lift(basis, points);
}

void TrajectoryDataset::validate() const {
    if (action_count == 0) throw InputError("dataset declares no actions");
    Eigen::Index dim = -1;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& tr = trajectories[i];
        if (tr.states.size() < 2 || tr.states.size() != tr.actions.size() + 1) {
            throw InputError("trajectory " + std::to_string(i) + " needs n >= 2 states and n-1 actions");
        }
        for (Action a : tr.actions) {
            if (a >= action_count) throw InputError("trajectory " + std::to_string(i) + " has an invalid action");
        }
        for (const auto& s : tr.states) {
            if (dim < 0) dim = s.size();
            if (s.size() != dim) throw InputError("trajectory states have mixed dimensions");
        }
    }
}

std::size_t TrajectoryDataset::transition_count() const {
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.actions.size();
    return n;
}

Vector lift_for_fit(const TrajectoryDataset& dataset, const ObservableBasis* basis, const CostSpec& cost,
                    const Vector& raw) {
    Vector base = (dataset.prelifted || basis == nullptr) ? raw : lift_state(*basis, raw);
    if (!cost.observable) return base;
    Vector out(base.size() + 1);
    out.head(base.size()) = base;
    out[base.size()] = cost.observable(raw);
    return out;
}

FitResult fit_koopman(const TrajectoryDataset& dataset, const ObservableBasis* basis, const CostSpec& cost,
                      const Vector& initial_raw, std::size_t horizon, std::vector<std::string> action_labels,
                      const FitOptions& options) {
    dataset.validate();
    if (!dataset.prelifted && basis == nullptr) throw InputError("raw dataset needs an observable basis");
    const std::size_t actions = dataset.action_count;
    if (action_labels.empty()) {
        for (std::size_t a = 0; a < actions; ++a) action_labels.push_back("u" + std::to_string(a));
    }
    if (action_labels.size() != actions) throw InputError("action label count does not match the dataset");

    // Gather lifted pairs per action, rows in dataset order.
    std::vector<std::vector<Vector>> from(actions), to(actions);
    for (const auto& tr : dataset.trajectories) {
        std::vector<Vector> lifted;
        lifted.reserve(tr.states.size());
        for (const auto& s : tr.states) lifted.push_back(lift_for_fit(dataset, basis, cost, s));
        for (std::size_t k = 0; k < tr.actions.size(); ++k) {
            from[tr.actions[k]].push_back(lifted[k]);
            to[tr.actions[k]].push_back(lifted[k + 1]);
        }
    }
    const Vector psi1 = lift_for_fit(dataset, basis, cost, initial_raw);
    const auto n = psi1.size();

    for (std::size_t a = 0; a < actions; ++a) {
        if (from[a].size() < static_cast<std::size_t>(n)) {
            std::ostringstream os;
            os << "action " << a << " (" << action_labels[a] << ") has " << from[a].size()
               << " transitions; at least n_psi = " << n << " are needed";
            throw FitError(os.str(), a);
        }
    }

    std::vector<Matrix> dynamics(actions);
    std::vector<std::size_t> rank(actions), counts(actions);
    std::vector<double> residual(actions);
    std::vector<std::exception_ptr> failures(actions);
#pragma omp parallel for num_threads(static_cast<int>(std::max<std::size_t>(1, options.threads))) schedule(static)
    for (std::ptrdiff_t ai = 0; ai < static_cast<std::ptrdiff_t>(actions); ++ai) {
        const auto a = static_cast<std::size_t>(ai);
        try {
            const auto rows = static_cast<Eigen::Index>(from[a].size());
            Matrix X(rows, n), Y(rows, n);
            for (Eigen::Index r = 0; r < rows; ++r) {
                X.row(r) = from[a][static_cast<std::size_t>(r)].transpose();
                Y.row(r) = to[a][static_cast<std::size_t>(r)].transpose();
            }
            Eigen::ColPivHouseholderQR<Matrix> qr(X);
            qr.setThreshold(options.rank_tolerance);
            // X A^T = Y
            const Matrix At = qr.solve(Y);
            dynamics[a] = At.transpose();
            rank[a] = static_cast<std::size_t>(qr.rank());
            counts[a] = from[a].size();
            residual[a] = (X * At - Y).squaredNorm();
        } catch (...) {
            failures[a] = std::current_exception();
        }
    }
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    RowVector c;
    if (cost.observable) {
        c = RowVector::Zero(n);
        c[n - 1] = 1.0;
    } else if (cost.row) {
        if (cost.row->size() != n) {
            std::ostringstream os;
            os << "cost row has length " << cost.row->size() << ", lifted dimension is " << n;
            throw InputError(os.str());
        }
        c = *cost.row;
    } else {
        throw InputError("cost needs a row or an observable");
    }

    std::vector<std::string> warnings;
    for (std::size_t a = 0; a < actions; ++a) {
        if (rank[a] < static_cast<std::size_t>(n)) {
            std::ostringstream os;
            os << "regressor for action " << a << " (" << action_labels[a] << ") is rank deficient: rank " << rank[a]
               << " < " << n;
            warnings.push_back(os.str());
        }
    }

    return FitResult{KoopmanModel(std::move(action_labels), std::move(dynamics), std::move(c), psi1, horizon),
                     std::move(rank), std::move(counts), std::move(residual), std::move(warnings)};
}

}  // namespace ktemper::edmd
