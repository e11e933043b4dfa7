#include "ktemper/baselines.hpp"

#include "ktemper/error.hpp"
#include "ktemper/random.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace ktemper::baselines {

namespace {

constexpr double kSimplexTolerance = 1e-9;

void check_shape(const KoopmanModel& model, const RelaxedControls& controls) {
    if (controls.mu.rows() != static_cast<Eigen::Index>(model.horizon()) ||
        controls.mu.cols() != static_cast<Eigen::Index>(model.action_count())) {
        std::ostringstream os;
        os << "relaxed controls are " << controls.mu.rows() << "x" << controls.mu.cols() << ", expected "
           << model.horizon() << "x" << model.action_count();
        throw InputError(os.str());
    }
}

std::vector<Vector> mixed_forward(const KoopmanModel& model, const Matrix& mu) {
    std::vector<Vector> states(model.horizon() + 1);
    states[0] = model.initial_state();
    Vector product(model.initial_state().size());
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        states[t + 1] = Vector::Zero(product.size());
        for (Action a : model.allowed(t)) {
            const double w = mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
            if (w == 0.0) continue;
            product.noalias() = model.dynamics(a) * states[t];
            states[t + 1] += w * product;
        }
    }
    return states;
}

void project_rows(const KoopmanModel& model, Matrix& mu) {
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        const auto allowed = model.allowed(t);
        Vector row(static_cast<Eigen::Index>(allowed.size()));
        for (std::size_t k = 0; k < allowed.size(); ++k) {
            row[static_cast<Eigen::Index>(k)] = mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(allowed[k]));
        }
        const Vector projected = project_simplex(row);
        mu.row(static_cast<Eigen::Index>(t)).setZero();
        for (std::size_t k = 0; k < allowed.size(); ++k) {
            mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(allowed[k])) =
                projected[static_cast<Eigen::Index>(k)];
        }
    }
}

// Removes the per-row mean over the admissible actions, leaving the
// component of the gradient inside the simplex' affine hull.
void tangent_rows(const KoopmanModel& model, Matrix& g) {
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        const auto allowed = model.allowed(t);
        double mean = 0.0;
        for (Action a : allowed) mean += g(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
        mean /= static_cast<double>(allowed.size());
        for (Action a : allowed) g(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a)) -= mean;
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void validate(const KoopmanModel& model, const RelaxedControls& controls) {
    check_shape(model, controls);
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        double sum = 0.0;
        for (std::size_t a = 0; a < model.action_count(); ++a) {
            const double w = controls.mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
            if (!std::isfinite(w) || w < -kSimplexTolerance || w > 1.0 + kSimplexTolerance) {
                throw InputError("relaxed weight outside [0, 1] at step " + std::to_string(t));
            }
            if (!model.is_allowed(t, a) && w != 0.0) {
                throw InputError("relaxed weight on a masked action at step " + std::to_string(t));
            }
            sum += w;
        }
        if (std::abs(sum - 1.0) > kSimplexTolerance) {
            throw InputError("relaxed weights at step " + std::to_string(t) + " do not sum to 1");
        }
    }
}

RelaxedControls centroid(const KoopmanModel& model) {
    RelaxedControls out{Matrix::Zero(static_cast<Eigen::Index>(model.horizon()),
                                     static_cast<Eigen::Index>(model.action_count()))};
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        const auto allowed = model.allowed(t);
        for (Action a : allowed) {
            out.mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a)) = 1.0 / static_cast<double>(allowed.size());
        }
    }
    return out;
}

RelaxedControls one_hot(const KoopmanModel& model, const ControlSequence& u) {
    model.validate(u);
    RelaxedControls out{Matrix::Zero(static_cast<Eigen::Index>(model.horizon()),
                                     static_cast<Eigen::Index>(model.action_count()))};
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        out.mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(u[t])) = 1.0;
    }
    return out;
}

double mixed_cost(const KoopmanModel& model, const Matrix& mu) {
    check_shape(model, RelaxedControls{mu});
    return model.cost_row().dot(mixed_forward(model, mu).back());
}

double relaxed_cost(const KoopmanModel& model, const RelaxedControls& controls) {
    validate(model, controls);
    return model.cost_row().dot(mixed_forward(model, controls.mu).back());
}

Matrix relaxed_gradient(const KoopmanModel& model, const RelaxedControls& controls) {
    validate(model, controls);
    const auto states = mixed_forward(model, controls.mu);
    Matrix grad = Matrix::Zero(controls.mu.rows(), controls.mu.cols());
    RowVector back = model.cost_row();
    RowVector row(back.size());
    RowVector next(back.size());
    for (std::size_t t = model.horizon(); t-- > 0;) {
        next.setZero();
        for (Action a : model.allowed(t)) {
            row.noalias() = back * model.dynamics(a);
            grad(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a)) = row.dot(states[t]);
            const double w = controls.mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
            if (w != 0.0) next += w * row;
        }
        back.swap(next);
    }
    return grad;
}

Vector project_simplex(const Vector& v) {
    const auto n = v.size();
    if (n == 0) throw InputError("cannot project an empty vector onto the simplex");
    if (!v.allFinite()) throw InputError("cannot project a non-finite vector onto the simplex");
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double threshold = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumulative += sorted[static_cast<std::size_t>(j)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[static_cast<std::size_t>(j)] - candidate > 0.0) threshold = candidate;
    }
    Vector w = (v.array() - threshold).cwiseMax(0.0).matrix();
    const double total = w.sum();
    if (std::abs(total - 1.0) > 1e-15) w /= total;
    return w;
}

ControlSequence round_to_sequence(const KoopmanModel& model, const RelaxedControls& controls) {
    check_shape(model, controls);
    std::vector<Action> steps(model.horizon());
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        const auto allowed = model.allowed(t);
        Action best = allowed.front();
        double best_w = controls.mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(best));
        for (Action a : allowed) {
            const double w = controls.mu(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
            if (w > best_w) {
                best = a;
                best_w = w;
            }
        }
        steps[t] = best;
    }
    return ControlSequence(std::move(steps));
}

GradientResult gradient_solve(const KoopmanModel& model, const GradientConfig& config) {
    if (!(config.eta > 0.0)) throw ConfigError("step size eta must be positive");
    if (!(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0)) {
        throw ConfigError("moment decay rates must lie in [0, 1)");
    }
    const auto started = std::chrono::steady_clock::now();
    RelaxedControls current = centroid(model);
    if (config.init_jitter > 0.0) {
        RandomStream rng(config.seed, 0);
        for (Eigen::Index i = 0; i < current.mu.size(); ++i) {
            current.mu.data()[i] += config.init_jitter * (2.0 * rng.uniform() - 1.0);
        }
        project_rows(model, current.mu);
    }

    auto evaluate = [&](const RelaxedControls& c) {
        const double j = relaxed_cost(model, c);
        if (!std::isfinite(j)) throw NumericError("relaxed cost diverged");
        return j;
    };

    GradientResult result;
    result.mu = current;
    result.relaxed = evaluate(current);
    result.relaxed_history.push_back(result.relaxed);
    result.rounded_history.push_back(cost(model, round_to_sequence(model, current)));

    Matrix m = Matrix::Zero(current.mu.rows(), current.mu.cols());
    Matrix v = m;
    double b1_power = 1.0;
    double b2_power = 1.0;
    for (std::size_t k = 1; k <= config.iterations; ++k) {
        Matrix g = relaxed_gradient(model, current);
        tangent_rows(model, g);
        b1_power *= config.beta1;
        b2_power *= config.beta2;
        m = config.beta1 * m + (1.0 - config.beta1) * g;
        v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
        const Matrix m_hat = m / (1.0 - b1_power);
        const Matrix v_hat = v / (1.0 - b2_power);
        const Matrix look_ahead = config.beta1 * m_hat + ((1.0 - config.beta1) / (1.0 - b1_power)) * g;
        current.mu -= config.eta * look_ahead.cwiseQuotient((v_hat.cwiseSqrt().array() + config.epsilon).matrix());
        project_rows(model, current.mu);

        const double j = evaluate(current);
        result.relaxed_history.push_back(j);
        result.rounded_history.push_back(cost(model, round_to_sequence(model, current)));
        if (j < result.relaxed) {
            result.relaxed = j;
            result.mu = current;
        }
    }
    result.rounded = round_to_sequence(model, result.mu);
    result.rounded_cost = cost(model, result.rounded);
    result.wall_time = seconds_since(started);
    return result;
}

void GAConfig::validate() const {
    if (population < 2) throw ConfigError("GA population must be at least 2");
    if (selection_mu < 1 || selection_mu > population) throw ConfigError("GA selection size must be in [1, population]");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("GA mutation rate must be in [0, 1]");
    if (!(gene_mutation_prob >= 0.0 && gene_mutation_prob <= 1.0)) {
        throw ConfigError("GA gene mutation probability must be in [0, 1]");
    }
    if (threads < 1) throw ConfigError("GA threads must be at least 1");
}

GAResult genetic_solve(const KoopmanModel& model, const GAConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    RandomStream rng(config.seed, 0);
    const std::size_t horizon = model.horizon();
    const int workers = static_cast<int>(config.threads);

    std::vector<ControlSequence> population;
    population.reserve(config.population);
    for (std::size_t i = 0; i < config.population; ++i) {
        std::vector<Action> steps(horizon);
        for (std::size_t t = 0; t < horizon; ++t) {
            const auto allowed = model.allowed(t);
            steps[t] = allowed[rng.index(allowed.size())];
        }
        population.emplace_back(std::move(steps));
    }
    std::vector<double> fitness(config.population);
    auto evaluate = [&] {
#pragma omp parallel for num_threads(workers) schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(population.size()); ++i) {
            fitness[static_cast<std::size_t>(i)] = cost(model, population[static_cast<std::size_t>(i)]);
        }
    };

    GAResult result;
    result.best_cost = std::numeric_limits<double>::infinity();
    auto record = [&] {
        const auto it = std::min_element(fitness.begin(), fitness.end());
        const auto idx = static_cast<std::size_t>(it - fitness.begin());
        result.generation_best.push_back(*it);
        if (*it < result.best_cost) {
            result.best_cost = *it;
            result.best = population[idx];
        }
        result.history.push_back(result.best_cost);
    };
    evaluate();
    record();

    std::vector<std::size_t> order(config.population);
    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });

        std::vector<ControlSequence> next;
        next.reserve(config.population);
        next.push_back(population[order[0]]);
        while (next.size() < config.population) {
            const auto& first = population[order[rng.index(config.selection_mu)]];
            const auto& second = population[order[rng.index(config.selection_mu)]];
            ControlSequence child = first;
            if (config.single_point_crossover && horizon > 1) {
                const std::size_t cut = 1 + rng.index(horizon - 1);
                for (std::size_t t = cut; t < horizon; ++t) child[t] = second[t];
            }
            if (rng.uniform() < config.mutation_rate) {
                for (std::size_t t = 0; t < horizon; ++t) {
                    if (rng.uniform() < config.gene_mutation_prob) {
                        const auto allowed = model.allowed(t);
                        child[t] = allowed[rng.index(allowed.size())];
                    }
                }
            }
            next.push_back(std::move(child));
        }
        population.swap(next);
        evaluate();
        record();
    }
    result.wall_time = seconds_since(started);
    return result;
}

}  // namespace ktemper::baselines
