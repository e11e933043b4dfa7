#include "ktemper/sampler.hpp"

#include "ktemper/reference.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

namespace ktemper {

namespace {

constexpr double kExponentFloor = -700.0;

}  // namespace

TemperatureLadder::TemperatureLadder(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) throw ConfigError("temperature ladder is empty");
    for (std::size_t j = 0; j < betas_.size(); ++j) {
        const double b = betas_[j];
        if (!std::isfinite(b)) throw ConfigError("temperature ladder has a non-finite beta");
        if (b < 0.0 || (b == 0.0 && betas_.size() > 1)) {
            std::ostringstream os;
            os << "beta[" << j << "] = " << b << " must be positive";
            throw ConfigError(os.str());
        }
        if (j > 0 && !(b > betas_[j - 1])) throw ConfigError("temperature ladder must be strictly increasing");
    }
}

TemperatureLadder make_log_ladder(double beta_min, double beta_max, std::size_t count) {
    if (count < 2) throw ConfigError("a logarithmic ladder needs at least 2 temperatures");
    if (!(beta_min > 0.0) || !std::isfinite(beta_max)) throw ConfigError("ladder bounds must be positive and finite");
    if (!(beta_min < beta_max)) throw ConfigError("beta_min must be smaller than beta_max");
    std::vector<double> betas(count);
    const double log_ratio = std::log(beta_max / beta_min);
    for (std::size_t j = 0; j < count; ++j) {
        betas[j] = beta_min * std::exp(log_ratio * static_cast<double>(j) / static_cast<double>(count - 1));
    }
    betas.front() = beta_min;
    betas.back() = beta_max;
    return TemperatureLadder(std::move(betas));
}

void rebuild_caches(const KoopmanModel& model, Replica& replica) {
    model.validate(replica.u);
    const std::size_t horizon = model.horizon();
    replica.x_cache.resize(horizon + 1);
    replica.c_cache.resize(horizon + 1);
    replica.x_cache[0] = model.initial_state();
    for (std::size_t t = 0; t < horizon; ++t) {
        replica.x_cache[t + 1].noalias() = model.dynamics(replica.u[t]) * replica.x_cache[t];
    }
    replica.c_cache[horizon] = model.cost_row();
    for (std::size_t t = horizon; t-- > 0;) {
        replica.c_cache[t].noalias() = replica.c_cache[t + 1] * model.dynamics(replica.u[t]);
    }
    replica.current_cost = model.cost_row().dot(replica.x_cache[horizon]);
}

Replica make_replica(const KoopmanModel& model, double beta, ControlSequence u) {
    Replica replica;
    replica.beta = beta;
    replica.u = std::move(u);
    rebuild_caches(model, replica);
    return replica;
}

ControlSequence random_sequence(const KoopmanModel& model, RandomStream& rng) {
    std::vector<Action> steps(model.horizon());
    for (std::size_t t = 0; t < model.horizon(); ++t) {
        const auto allowed = model.allowed(t);
        steps[t] = allowed[rng.index(allowed.size())];
    }
    return ControlSequence(std::move(steps));
}

void boltzmann_from_energies(std::span<double> values, double beta, std::span<const Action> allowed) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!std::isfinite(values[k])) {
            const Action a = k < allowed.size() ? allowed[k] : k;
            std::ostringstream os;
            os << "non-finite energy " << values[k] << " for action " << a;
            throw NumericError(os.str(), a);
        }
        values[k] = -beta * values[k];
        top = std::max(top, values[k]);
    }
    double total = 0.0;
    for (double& v : values) {
        v = std::exp(std::max(v - top, kExponentFloor));
        total += v;
    }
    for (double& v : values) v /= total;
}

std::vector<double> conditional_pmf(const RowVector& c_next, const Vector& x, double beta,
                                    std::span<const Action> allowed, const KoopmanModel& model) {
    if (allowed.empty()) throw InputError("conditional over an empty action set");
    if (static_cast<std::size_t>(c_next.size()) != model.lifted_dim() ||
        static_cast<std::size_t>(x.size()) != model.lifted_dim()) {
        throw ModelError("conditional: vector length does not match n_psi");
    }
    std::vector<double> probs(allowed.size());
    RowVector row(c_next.size());
    for (std::size_t k = 0; k < allowed.size(); ++k) {
        row.noalias() = c_next * model.dynamics(allowed[k]);
        probs[k] = row.dot(x);
    }
    boltzmann_from_energies(probs, beta, allowed);
    return probs;
}

void gibbs_sweep(const KoopmanModel& model, Replica& replica, RandomStream& rng, const SweepObserver& observer) {
    const std::size_t horizon = model.horizon();
    if (replica.x_cache.size() != horizon + 1 || replica.c_cache.size() != horizon + 1) {
        rebuild_caches(model, replica);
    }
    std::vector<double> probs;
    probs.reserve(model.action_count());
    RowVector row(static_cast<Eigen::Index>(model.lifted_dim()));
    std::uint64_t products = 0;

    for (std::size_t t = 0; t < horizon; ++t) {
        const auto allowed = model.allowed(t);
        probs.resize(allowed.size());
        for (std::size_t k = 0; k < allowed.size(); ++k) {
            row.noalias() = replica.c_cache[t + 1] * model.dynamics(allowed[k]);
            probs[k] = row.dot(replica.x_cache[t]);
        }
        products += allowed.size();
        boltzmann_from_energies(probs, replica.beta, allowed);
        if (observer) observer(t, replica.u, probs);
        replica.u[t] = allowed[sample_index(probs, rng.uniform())];
        replica.x_cache[t + 1].noalias() = model.dynamics(replica.u[t]) * replica.x_cache[t];
        ++products;
    }

    replica.c_cache[horizon] = model.cost_row();
    for (std::size_t t = horizon; t-- > 0;) {
        replica.c_cache[t].noalias() = replica.c_cache[t + 1] * model.dynamics(replica.u[t]);
    }
    products += horizon;

    replica.current_cost = model.cost_row().dot(replica.x_cache[horizon]);
    replica.matvec_count += products;
    if (!std::isfinite(replica.current_cost)) throw NumericError("sweep produced a non-finite cost");
}

double flip_probability(double beta_lo, double beta_hi, double cost_lo, double cost_hi) {
    if (!std::isfinite(beta_lo) || !std::isfinite(beta_hi) || !std::isfinite(cost_lo) || !std::isfinite(cost_hi)) {
        throw NumericError("flip probability with non-finite input");
    }
    const double exponent = (beta_hi - beta_lo) * (cost_hi - cost_lo);
    if (exponent >= 0.0) return 1.0;
    return std::exp(std::max(exponent, kExponentFloor));
}

std::vector<bool> tempering_sweep(std::span<Replica> replicas, RandomStream& rng) {
    std::vector<bool> flips(replicas.empty() ? 0 : replicas.size() - 1, false);
    for (std::size_t j = 0; j + 1 < replicas.size(); ++j) {
        Replica& lo = replicas[j];
        Replica& hi = replicas[j + 1];
        const double p = flip_probability(lo.beta, hi.beta, lo.current_cost, hi.current_cost);
        if (rng.uniform() < p) {
            std::swap(lo.u, hi.u);
            std::swap(lo.x_cache, hi.x_cache);
            std::swap(lo.c_cache, hi.c_cache);
            std::swap(lo.current_cost, hi.current_cost);
            flips[j] = true;
        }
    }
    return flips;
}

void sweep_all(const KoopmanModel& model, std::span<Replica> replicas, std::span<RandomStream> streams,
               SweepKernel kernel, std::size_t threads) {
    const std::size_t rungs = replicas.size();
    if (streams.size() != rungs) throw InputError("sweep_all: one random stream per replica is required");
    std::vector<std::exception_ptr> failures(rungs);
    if (kernel == SweepKernel::cached) {
        const int workers = static_cast<int>(std::max<std::size_t>(1, std::min(threads, rungs)));
#pragma omp parallel for num_threads(workers) schedule(static)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(rungs); ++j) {
            try {
                gibbs_sweep(model, replicas[j], streams[j]);
            } catch (...) {
                failures[j] = std::current_exception();
            }
        }
    } else {
        for (std::size_t j = 0; j < rungs; ++j) {
            try {
                reference::gibbs_sweep(model, replicas[j], streams[j]);
            } catch (...) {
                failures[j] = std::current_exception();
            }
        }
    }
    for (const auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }
}

void SamplerConfig::validate() const {
    if (ladder.size() == 0) throw ConfigError("sampler config has no temperatures");
    if (sweeps < 1) throw ConfigError("sweeps must be at least 1");
    if (trace_every < 1) throw ConfigError("trace_every must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
}

SolveResult solve(const KoopmanModel& model, const SamplerConfig& config) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    const std::size_t rungs = config.ladder.size();

    std::vector<RandomStream> streams;
    streams.reserve(rungs);
    std::vector<Replica> replicas;
    replicas.reserve(rungs);
    for (std::size_t j = 0; j < rungs; ++j) {
        streams.emplace_back(config.seed, j);
        replicas.push_back(make_replica(model, config.ladder[j], random_sequence(model, streams.back())));
    }
    RandomStream exchange(config.seed, rungs + 1);

    SolveResult result;
    result.flip_counts.assign(rungs - 1, 0);
    result.best_cost = std::numeric_limits<double>::infinity();
    std::vector<double> running_best(rungs);
    for (std::size_t j = 0; j < rungs; ++j) {
        running_best[j] = replicas[j].current_cost;
        if (replicas[j].current_cost < result.best_cost) {
            result.best_cost = replicas[j].current_cost;
            result.best_sequence = replicas[j].u;
        }
    }

    auto finish = [&] {
        result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.matvec_count = 0;
        for (const auto& r : replicas) result.matvec_count += r.matvec_count;
    };

    for (std::size_t sweep = 1; sweep <= config.sweeps; ++sweep) {
        try {
            sweep_all(model, replicas, streams, config.kernel, config.threads);
        } catch (const NumericError& e) {
            finish();
            throw SolveAborted(e, std::move(result));
        }

        for (std::size_t j = 0; j < rungs; ++j) {
            running_best[j] = std::min(running_best[j], replicas[j].current_cost);
            if (replicas[j].current_cost < result.best_cost) {
                result.best_cost = replicas[j].current_cost;
                result.best_sequence = replicas[j].u;
                result.best_found_at_sweep = sweep;
            }
        }

        const auto flips = tempering_sweep(replicas, exchange);
        for (std::size_t j = 0; j < flips.size(); ++j) {
            if (flips[j]) ++result.flip_counts[j];
        }
        for (std::size_t j = 0; j < rungs; ++j) running_best[j] = std::min(running_best[j], replicas[j].current_cost);
        result.sweep_count = sweep;

        if (sweep % config.trace_every == 0 || sweep == config.sweeps) {
            TraceRecord record;
            record.sweep_index = sweep;
            record.per_replica_cost.reserve(rungs);
            for (const auto& r : replicas) record.per_replica_cost.push_back(r.current_cost);
            record.per_replica_best = running_best;
            record.flips_this_sweep = flips;
            result.trace.push_back(std::move(record));
        }
    }
    finish();
    return result;
}

}  // namespace ktemper
