#include "ktemper/diagnostics.hpp"

#include "ktemper/error.hpp"
#include "ktemper/sampler.hpp"

#include <Eigen/LU>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

namespace ktemper::diagnostics {

namespace {

constexpr double kMinimizerTolerance = 1e-12;
constexpr std::size_t kDirectSolveLimit = 4096;

// Mixed-radix layout of the feasible set: digit t is the position of u_t
// in allowed(t), step 0 most significant.
struct Radix {
    std::vector<std::size_t> radix;
    std::vector<std::size_t> stride;

    explicit Radix(const KoopmanModel& model) : radix(model.horizon()), stride(model.horizon()) {
        std::size_t s = 1;
        for (std::size_t t = model.horizon(); t-- > 0;) {
            radix[t] = model.allowed(t).size();
            stride[t] = s;
            s *= radix[t];
        }
    }

    std::size_t digit(std::size_t index, std::size_t t) const { return (index / stride[t]) % radix[t]; }
};

ControlSequence decode(const KoopmanModel& model, const Radix& layout, std::size_t index) {
    std::vector<Action> steps(model.horizon());
    for (std::size_t t = 0; t < model.horizon(); ++t) steps[t] = model.allowed(t)[layout.digit(index, t)];
    return ControlSequence(std::move(steps));
}

// Boltzmann weights normalized over `energies`, written to `out`.
void normalized_weights(std::span<const double> energies, double beta, std::span<double> out) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < energies.size(); ++k) top = std::max(top, -beta * energies[k]);
    double total = 0.0;
    for (std::size_t k = 0; k < energies.size(); ++k) {
        out[k] = std::exp(-beta * energies[k] - top);
        total += out[k];
    }
    for (double& v : out) v /= total;
}

Eigen::SparseMatrix<double> sparse_gibbs_kernel(const Radix& layout,
                                                const std::vector<double>& costs, double beta, std::size_t step) {
    const std::size_t count = costs.size();
    const std::size_t width = layout.radix[step];
    const std::size_t stride = layout.stride[step];
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(count * width);
    std::vector<double> energies(width);
    std::vector<double> probs(width);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t base = i - layout.digit(i, step) * stride;
        for (std::size_t k = 0; k < width; ++k) energies[k] = costs[base + k * stride];
        normalized_weights(energies, beta, probs);
        for (std::size_t k = 0; k < width; ++k) {
            entries.emplace_back(static_cast<int>(i), static_cast<int>(base + k * stride), probs[k]);
        }
    }
    Eigen::SparseMatrix<double> kernel(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
    kernel.setFromTriplets(entries.begin(), entries.end());
    return kernel;
}

}  // namespace

std::size_t checked_state_count(const KoopmanModel& model, std::size_t cap) {
    const BigInt count = sequence_count(model);
    if (count > cap) {
        std::ostringstream os;
        os << "refusing to enumerate " << count.str() << " sequences (cap " << cap << ")";
        throw EnumerationRefused(os.str(), count.str());
    }
    return count.convert_to<std::size_t>();
}

std::vector<ControlSequence> enumerate_sequences(const KoopmanModel& model, std::size_t cap) {
    const std::size_t count = checked_state_count(model, cap);
    const Radix layout(model);
    std::vector<ControlSequence> states;
    states.reserve(count);
    for (std::size_t i = 0; i < count; ++i) states.push_back(decode(model, layout, i));
    return states;
}

std::vector<double> enumerate_costs(const KoopmanModel& model, std::size_t cap) {
    const std::size_t count = checked_state_count(model, cap);
    const std::size_t horizon = model.horizon();
    std::vector<double> costs;
    costs.reserve(count);
    std::vector<Vector> states(horizon + 1);
    states[0] = model.initial_state();
    std::function<void(std::size_t)> descend = [&](std::size_t t) {
        if (t == horizon) {
            costs.push_back(model.cost_row().dot(states[horizon]));
            return;
        }
        for (Action a : model.allowed(t)) {
            states[t + 1].noalias() = model.dynamics(a) * states[t];
            descend(t + 1);
        }
    };
    descend(0);
    return costs;
}

MinimumResult brute_force_min(const KoopmanModel& model, std::size_t cap) {
    const auto costs = enumerate_costs(model, cap);
    const Radix layout(model);
    MinimumResult result;
    result.j_star = *std::min_element(costs.begin(), costs.end());
    if (!std::isfinite(result.j_star)) throw NumericError("enumerated costs are not finite");
    for (std::size_t i = 0; i < costs.size(); ++i) {
        if (costs[i] <= result.j_star + kMinimizerTolerance) result.minimizers.push_back(decode(model, layout, i));
    }
    return result;
}

BoltzmannDistribution boltzmann(const KoopmanModel& model, double beta, std::size_t cap) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InputError("beta must be finite and non-negative");
    BoltzmannDistribution dist;
    dist.beta = beta;
    dist.costs = enumerate_costs(model, cap);
    dist.states = enumerate_sequences(model, cap);
    const std::size_t count = dist.costs.size();
    double top = -std::numeric_limits<double>::infinity();
    for (double j : dist.costs) top = std::max(top, -beta * j);
    dist.probs.resize(static_cast<Eigen::Index>(count));
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        dist.probs[static_cast<Eigen::Index>(i)] = std::exp(-beta * dist.costs[i] - top);
        total += dist.probs[static_cast<Eigen::Index>(i)];
    }
    dist.probs /= total;
    dist.log_partition = top + std::log(total);
    dist.partition = std::exp(dist.log_partition);
    return dist;
}

TransitionMatrix gibbs_kernel(const KoopmanModel& model, double beta, std::size_t step, std::size_t cap) {
    if (step >= model.horizon()) throw InputError("gibbs_kernel: step out of range");
    checked_state_count(model, cap);
    const Radix layout(model);
    const auto costs = enumerate_costs(model, cap);
    TransitionMatrix kernel;
    kernel.states = enumerate_sequences(model, cap);
    kernel.P = Matrix(sparse_gibbs_kernel(layout, costs, beta, step));
    return kernel;
}

TransitionMatrix sweep_kernel(const KoopmanModel& model, double beta, std::size_t cap) {
    const std::size_t count = checked_state_count(model, cap);
    const Radix layout(model);
    const auto costs = enumerate_costs(model, cap);
    TransitionMatrix kernel;
    kernel.states = enumerate_sequences(model, cap);
    Matrix product = Matrix::Identity(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        const auto step_kernel = sparse_gibbs_kernel(layout, costs, beta, t);
        Matrix next = product * step_kernel;
        product.swap(next);
    }
    kernel.P = std::move(product);
    return kernel;
}

Matrix tempering_kernel(const KoopmanModel& model, std::span<const double> betas, std::size_t cap) {
    if (betas.empty()) throw InputError("tempering_kernel: no temperatures");
    const std::size_t base = checked_state_count(model, cap);
    std::size_t joint = 1;
    for (std::size_t m = 0; m < betas.size(); ++m) {
        joint *= base;
        if (joint > cap) {
            throw EnumerationRefused("refusing to build a joint kernel over " + std::to_string(joint) + "+ states",
                                     std::to_string(joint));
        }
    }
    const auto costs = enumerate_costs(model, cap);
    std::vector<Matrix> sweeps;
    for (double beta : betas) sweeps.push_back(sweep_kernel(model, beta, cap).P);

    const std::size_t rungs = betas.size();
    auto component = [&](std::size_t state, std::size_t rung) {
        std::size_t divisor = 1;
        for (std::size_t m = rung + 1; m < rungs; ++m) divisor *= base;
        return (state / divisor) % base;
    };

    const auto n = static_cast<Eigen::Index>(joint);
    Matrix kernel(n, n);
    for (std::size_t a = 0; a < joint; ++a) {
        for (std::size_t b = 0; b < joint; ++b) {
            double p = 1.0;
            for (std::size_t m = 0; m < rungs && p != 0.0; ++m) {
                p *= sweeps[m](static_cast<Eigen::Index>(component(a, m)), static_cast<Eigen::Index>(component(b, m)));
            }
            kernel(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = p;
        }
    }

    for (std::size_t j = 0; j + 1 < rungs; ++j) {
        std::vector<Eigen::Triplet<double>> entries;
        std::size_t lo_divisor = 1;
        for (std::size_t m = j + 1; m < rungs; ++m) lo_divisor *= base;
        const std::size_t hi_divisor = lo_divisor / base;
        for (std::size_t s = 0; s < joint; ++s) {
            const std::size_t lo = component(s, j);
            const std::size_t hi = component(s, j + 1);
            const double f = flip_probability(betas[j], betas[j + 1], costs[lo], costs[hi]);
            const std::size_t swapped = s - lo * lo_divisor - hi * hi_divisor + hi * lo_divisor + lo * hi_divisor;
            entries.emplace_back(static_cast<int>(s), static_cast<int>(swapped), f);
            entries.emplace_back(static_cast<int>(s), static_cast<int>(s), 1.0 - f);
        }
        Eigen::SparseMatrix<double> flip(n, n);
        flip.setFromTriplets(entries.begin(), entries.end());
        Matrix next = kernel * flip;
        kernel.swap(next);
    }
    return kernel;
}

Vector tempering_joint_distribution(const KoopmanModel& model, std::span<const double> betas, std::size_t cap) {
    std::vector<Vector> marginals;
    for (double beta : betas) marginals.push_back(boltzmann(model, beta, cap).probs);
    Vector joint = Vector::Ones(1);
    for (const auto& m : marginals) {
        Vector next(joint.size() * m.size());
        for (Eigen::Index a = 0; a < joint.size(); ++a) next.segment(a * m.size(), m.size()) = joint[a] * m;
        joint.swap(next);
    }
    return joint;
}

bool is_regular(const Matrix& P) {
    const auto n = static_cast<std::size_t>(P.rows());
    if (n == 0 || P.cols() != P.rows()) return false;
    auto reach = [&](bool forward) {
        std::vector<bool> seen(n, false);
        std::deque<std::size_t> queue{0};
        seen[0] = true;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v = 0; v < n; ++v) {
                const double w = forward ? P(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v))
                                         : P(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u));
                if (w > 0.0 && !seen[v]) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    };
    if (!reach(true) || !reach(false)) return false;

    // Aperiodicity: gcd over edges of level(u) + 1 - level(v) must be 1.
    std::vector<long long> level(n, -1);
    std::deque<std::size_t> queue{0};
    level[0] = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop_front();
        for (std::size_t v = 0; v < n; ++v) {
            if (P(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    long long period = 0;
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
            if (P(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) > 0.0) {
                period = std::gcd(period, std::llabs(level[u] + 1 - level[v]));
            }
        }
    }
    return period == 1;
}

Vector stationary_distribution(const Matrix& P) {
    if (!is_regular(P)) throw InputError("transition matrix is not regular; no unique stationary distribution");
    const Eigen::Index n = P.rows();
    Vector pi;
    if (static_cast<std::size_t>(n) <= kDirectSolveLimit) {
        Matrix system = P.transpose() - Matrix::Identity(n, n);
        system.row(n - 1).setOnes();
        Vector rhs = Vector::Zero(n);
        rhs[n - 1] = 1.0;
        pi = system.partialPivLu().solve(rhs);
    } else {
        RowVector p = RowVector::Constant(n, 1.0 / static_cast<double>(n));
        for (std::size_t iter = 0;; ++iter) {
            RowVector next = p * P;
            const double residual = (next - p).lpNorm<1>();
            p.swap(next);
            if (residual <= 1e-12) break;
            if (iter > 10'000'000) throw NumericError("power iteration did not converge");
        }
        pi = p.transpose();
    }
    for (auto& v : pi) {
        if (v < 0.0) v = 0.0;
    }
    pi /= pi.sum();
    return pi;
}

double detailed_balance_residual(const Matrix& P, const Vector& pi) {
    const Matrix flow = pi.asDiagonal() * P;
    return (flow - flow.transpose()).cwiseAbs().maxCoeff();
}

double global_balance_residual(const Matrix& P, const Vector& pi) {
    return (pi.transpose() * P - pi.transpose()).lpNorm<1>();
}

std::vector<double> convergence_profile(const Matrix& P, const Vector& start, const Vector& pi, std::size_t steps) {
    std::vector<double> residuals;
    residuals.reserve(steps);
    RowVector p = start.transpose();
    for (std::size_t k = 0; k < steps; ++k) {
        RowVector next = p * P;
        p.swap(next);
        residuals.push_back((p - pi.transpose()).lpNorm<1>());
    }
    return residuals;
}

HoffmanBound hoffman_bound(const Matrix& P) {
    HoffmanBound bound;
    bound.p_max = P.colwise().maxCoeff().sum();
    bound.p_min = P.colwise().minCoeff().sum();
    bound.lambda_bound = (bound.p_max - bound.p_min) / (bound.p_max + bound.p_min);
    bound.mixing_bound = bound.p_min > 0.0 ? (bound.p_max + bound.p_min) / (2.0 * bound.p_min)
                                           : std::numeric_limits<double>::infinity();
    return bound;
}

double log_big(const BigInt& value) {
    if (value <= 0) throw InputError("log of a non-positive integer");
    const std::size_t bits = boost::multiprecision::msb(value);
    if (bits < 1000) return std::log(value.convert_to<double>());
    const std::size_t shift = bits - 60;
    const BigInt top = value >> shift;
    return std::log(top.convert_to<double>()) + static_cast<double>(shift) * std::log(2.0);
}

SampleComplexity sample_complexity(const BigInt& space_size, const BigInt& optimal_size, double epsilon, double delta,
                                   double beta) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InputError("epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
    if (optimal_size < 1 || optimal_size > space_size) throw InputError("need 1 <= |U*| <= |U|");
    const double log_ratio = log_big(space_size) - log_big(optimal_size);
    SampleComplexity out;
    out.beta_required = log_ratio / epsilon;
    const double margin = beta * epsilon - log_ratio;
    if (beta >= out.beta_required && margin > 0.0) {
        const double n = -std::log(delta) / margin;
        // Guard against ln/exp round-off pushing an exact integer up by one.
        out.samples = static_cast<std::uint64_t>(std::max(1.0, std::ceil(n * (1.0 - 1e-12))));
    }
    return out;
}

}  // namespace ktemper::diagnostics
