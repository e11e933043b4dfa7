#include "ktemper/bench.hpp"

#include "ktemper/model_io.hpp"
#include "ktemper/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

namespace ktemper::bench {

std::size_t peak_rss_bytes() {
    std::ifstream status("/proc/self/status");
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::istringstream fields(line.substr(6));
            std::size_t kib = 0;
            fields >> kib;
            return kib * 1024;
        }
    }
    return 0;
}

const char* kernel_name(SweepKernel kernel) {
    return kernel == SweepKernel::cached ? "cached" : "reference";
}

BenchRow run_case(const BenchCase& config) {
    synthetic::RandomModelSpec spec;
    spec.lifted_dim = config.lifted_dim;
    spec.horizon = config.horizon;
    spec.actions = config.actions;
    spec.seed = config.seed;
    return run_case(synthetic::random_model(spec), config);
}

BenchRow run_case(const KoopmanModel& model, const BenchCase& config) {
    if (config.temps < 1 || config.threads < 1 || config.repeats < 1) {
        throw ConfigError("bench: temps, threads and repeats must be at least 1");
    }
    BenchRow row;
    row.config = config;
    row.config.horizon = model.horizon();
    row.config.lifted_dim = model.lifted_dim();
    row.config.actions = model.action_count();

    const std::size_t rungs = config.temps;
    std::vector<RandomStream> streams;
    std::vector<Replica> replicas;
    for (std::size_t j = 0; j < rungs; ++j) {
        streams.emplace_back(config.seed, j);
        const double beta = rungs == 1 ? 1.0 : 0.5 * std::pow(100.0, static_cast<double>(j) / (rungs - 1));
        replicas.push_back(make_replica(model, beta, random_sequence(model, streams.back())));
    }

    sweep_all(model, replicas, streams, config.kernel, config.threads);
    for (auto& r : replicas) r.matvec_count = 0;

    std::vector<double> times;
    for (std::size_t k = 0; k < config.repeats; ++k) {
        const auto started = std::chrono::steady_clock::now();
        sweep_all(model, replicas, streams, config.kernel, config.threads);
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    }
    std::sort(times.begin(), times.end());
    row.seconds_min = times.front();
    row.seconds_per_sweep = times.size() % 2 == 1 ? times[times.size() / 2]
                                                   : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);

    row.matvecs_per_replica_sweep = replicas.front().matvec_count / config.repeats;
    const std::size_t n = model.lifted_dim();
    const std::size_t horizon = model.horizon();
    row.expected_matvecs = static_cast<std::uint64_t>(horizon * (model.action_count() + 2));
    row.cache_bytes = rungs * (horizon + 1) * 2 * n * sizeof(double);
    row.model_bytes = model.action_count() * n * n * sizeof(double);
    row.peak_rss_bytes = peak_rss_bytes();
    return row;
}

std::vector<BenchCase> grid(const std::vector<std::size_t>& horizons, const std::vector<std::size_t>& dims,
                            const std::vector<std::size_t>& temps, const std::vector<std::size_t>& threads,
                            std::size_t actions, std::size_t repeats, SweepKernel kernel, std::uint64_t seed) {
    std::vector<BenchCase> cases;
    for (std::size_t horizon : horizons) {
        for (std::size_t n : dims) {
            for (std::size_t m : temps) {
                for (std::size_t w : threads) {
                    BenchCase c;
                    c.horizon = horizon;
                    c.lifted_dim = n;
                    c.temps = m;
                    c.threads = w;
                    c.actions = actions;
                    c.repeats = repeats;
                    c.kernel = kernel;
                    c.seed = seed;
                    cases.push_back(c);
                }
            }
        }
    }
    return cases;
}

void write_header(std::ostream& out) {
    out << "horizon,n_psi,temps,threads,actions,kernel,repeats,seconds_per_sweep,seconds_min,"
           "matvecs_per_replica_sweep,expected_matvecs,cache_bytes,model_bytes,memory_estimate_bytes,peak_rss_bytes\n";
}

void write_row(std::ostream& out, const BenchRow& row) {
    const auto& c = row.config;
    out << c.horizon << ',' << c.lifted_dim << ',' << c.temps << ',' << c.threads << ',' << c.actions << ','
        << kernel_name(c.kernel) << ',' << c.repeats << ',' << io::format_double(row.seconds_per_sweep) << ','
        << io::format_double(row.seconds_min) << ',' << row.matvecs_per_replica_sweep << ','
        << row.expected_matvecs << ',' << row.cache_bytes << ',' << row.model_bytes << ','
        << row.cache_bytes + row.model_bytes << ',' << row.peak_rss_bytes << '\n';
}

}  // namespace ktemper::bench
