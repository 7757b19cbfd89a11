#pragma once

#include <memory>
#include <vector>

#include "rnav/common.hpp"
#include "rnav/rng.hpp"
#include "rnav/world.hpp"

namespace rnav {

/// Radical inverse of i in the given base (van der Corput). i >= 1, base >= 2.
double halton(std::uint64_t i, unsigned base);

/// Quasi-uniform unit directions. Element i uses Halton index i + 1:
/// elevation arccos(1 - 2 H(i+1, 2)), azimuth 2 pi H(i+1, 3).
struct DirectionSet {
    std::vector<Vec3> directions;
    std::vector<double> elevation;
    std::vector<double> azimuth;

    std::size_t size() const { return directions.size(); }
};

DirectionSet halton_directions(std::size_t n);

/// Shared, immutable direction set for n rays.
std::shared_ptr<const DirectionSet> shared_directions(std::size_t n);

/// Truncated distances along every direction of `set` from `origin`.
struct RayBundle {
    Vec3 origin = Vec3::Zero();
    std::shared_ptr<const DirectionSet> set;
    std::vector<double> distances;
    double max_range = 5.0;
    int step = 0;

    double min_distance() const;
};

RayBundle cast_bundle(const World& world, const Vec3& origin, std::shared_ptr<const DirectionSet> set,
                      double max_range, int step = 0);

inline constexpr double kNoiseFloor = 0.01;

/// Multiplicative sensor noise d * (1 + N(0, sigma^2)) per ray, clamped to [floor, max_range].
/// sigma == 0 returns the bundle unchanged without touching the rng.
RayBundle apply_noise(const RayBundle& bundle, double sigma, Rng& rng, double floor = kNoiseFloor);

}  // namespace rnav
