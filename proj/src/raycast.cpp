#include "rnav/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace rnav {

double halton(std::uint64_t i, unsigned base) {
    double f = 1.0;
    double r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

DirectionSet halton_directions(std::size_t n) {
    DirectionSet set;
    set.directions.reserve(n);
    set.elevation.reserve(n);
    set.azimuth.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = std::acos(1.0 - 2.0 * halton(i + 1, 2));
        const double theta = 2.0 * std::numbers::pi * halton(i + 1, 3);
        set.elevation.push_back(phi);
        set.azimuth.push_back(theta);
        set.directions.emplace_back(std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), std::cos(phi));
    }
    return set;
}

std::shared_ptr<const DirectionSet> shared_directions(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::shared_ptr<const DirectionSet>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<const DirectionSet>(halton_directions(n));
    return slot;
}

double RayBundle::min_distance() const {
    return distances.empty() ? max_range : *std::min_element(distances.begin(), distances.end());
}

RayBundle cast_bundle(const World& world, const Vec3& origin, std::shared_ptr<const DirectionSet> set,
                      double max_range, int step) {
    RayBundle b;
    b.origin = origin;
    b.max_range = max_range;
    b.step = step;
    b.distances.resize(set->size());
    for (std::size_t i = 0; i < set->size(); ++i) {
        b.distances[i] = world.ray_distance(origin, set->directions[i], max_range);
    }
    b.set = std::move(set);
    return b;
}

RayBundle apply_noise(const RayBundle& bundle, double sigma, Rng& rng, double floor) {
    if (sigma < 0.0) throw ConfigError("noise sigma must be non-negative");
    RayBundle out = bundle;
    if (sigma == 0.0) return out;
    for (double& d : out.distances) d = std::clamp(d * (1.0 + sigma * rng.normal()), floor, bundle.max_range);
    return out;
}

}  // namespace rnav
