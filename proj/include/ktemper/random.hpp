#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace ktemper {

/// Deterministic random stream identified by (seed, stream index).
///
/// Every replica, the tempering barrier, and each baseline owns one of
/// these, so results never depend on scheduling. Variates are produced
/// from raw 64-bit draws with our own transforms rather than the
/// implementation-defined std distributions.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer in [0, n); n > 0.
    std::size_t index(std::size_t n);

    /// Standard normal (Box-Muller, one value per call).
    double normal();

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Inverse-CDF draw from a probability vector with one uniform variate.
/// Never returns an index whose probability is zero.
std::size_t sample_index(std::span<const double> pmf, double uniform01);

}  // namespace ktemper
