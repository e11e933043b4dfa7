#pragma once

// Sweep timing harness shared by the `bench` subcommand, the benchmark
// executable and the acceptance suite.

#include "ktemper/model.hpp"
#include "ktemper/sampler.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace ktemper::bench {

struct BenchCase {
    std::size_t horizon = 20;
    std::size_t lifted_dim = 64;
    std::size_t temps = 1;
    std::size_t threads = 1;
    std::size_t actions = 4;
    /// Timed sweeps after one untimed warm-up sweep.
    std::size_t repeats = 5;
    SweepKernel kernel = SweepKernel::cached;
    std::uint64_t seed = 0;
};

struct BenchRow {
    BenchCase config;
    double seconds_per_sweep = 0.0;  ///< median over repeats, all rungs
    double seconds_min = 0.0;
    std::uint64_t matvecs_per_replica_sweep = 0;
    std::uint64_t expected_matvecs = 0;  ///< T (|U| + 2)
    std::size_t cache_bytes = 0;         ///< M (T+1) 2 n_psi doubles
    std::size_t model_bytes = 0;         ///< |U| n_psi^2 doubles
    std::size_t peak_rss_bytes = 0;      ///< VmHWM, 0 when unavailable
};

/// Times one case on a seeded random stable model of the case's size.
BenchRow run_case(const BenchCase& config);

/// Same, on a given model (its horizon, size and action count override the case's).
BenchRow run_case(const KoopmanModel& model, const BenchCase& config);

/// Cartesian product of the lists, horizon outermost.
std::vector<BenchCase> grid(const std::vector<std::size_t>& horizons, const std::vector<std::size_t>& dims,
                            const std::vector<std::size_t>& temps, const std::vector<std::size_t>& threads,
                            std::size_t actions, std::size_t repeats, SweepKernel kernel, std::uint64_t seed);

void write_header(std::ostream& out);
void write_row(std::ostream& out, const BenchRow& row);

/// Peak resident set size of this process in bytes (0 if unknown).
std::size_t peak_rss_bytes();

const char* kernel_name(SweepKernel kernel);

}  // namespace ktemper::bench
