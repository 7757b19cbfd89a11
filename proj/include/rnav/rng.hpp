#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rnav {

/// Seedable generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The standard distributions are implementation-defined, so the transforms
/// live here: uniform() takes the top 53 bits, below() uses rejection on the
/// largest multiple of n, and normal() is the Marsaglia polar method with the
/// second variate cached.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal variate.
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a named sub-stream of a master seed. Stages (worldgen, train,
/// bench, ...) draw from their own streams so each is reproducible alone.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

}  // namespace rnav
