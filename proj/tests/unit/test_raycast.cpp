#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rnav/raycast.hpp"
#include "rnav/world.hpp"

using namespace rnav;

namespace {

/// Radical inverse by explicit digit expansion into an exact fraction.
double radical_inverse_oracle(std::uint64_t i, unsigned base) {
    std::uint64_t num = 0, den = 1;
    while (i > 0) {
        num = num * base + i % base;
        den *= base;
        i /= base;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

World big_world(std::vector<Primitive> prims) {
    return World(Aabb{Vec3::Constant(-50), Vec3::Constant(50)}, std::move(prims), 0, WorldKind::sphere_box);
}

}  // namespace

TEST_CASE("halton values by hand") {
    CHECK(halton(1, 2) == 0.5);
    CHECK(halton(2, 2) == 0.25);
    CHECK(halton(3, 2) == 0.75);
    CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(halton(2, 3) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("halton matches the digit-expansion oracle up to 10^4") {
    for (unsigned base : {2u, 3u}) {
        for (std::uint64_t i = 1; i <= 10000; ++i) {
            const double h = halton(i, base);
            REQUIRE(std::abs(h - radical_inverse_oracle(i, base)) <= 1e-15);
            REQUIRE(h > 0.0);
            REQUIRE(h < 1.0);
        }
    }
}

TEST_CASE("halton directions follow the elevation/azimuth construction") {
    const DirectionSet s = halton_directions(1024);
    REQUIRE(s.size() == 1024);
    CHECK(s.elevation[0] == doctest::Approx(std::numbers::pi / 2));
    CHECK(s.azimuth[0] == doctest::Approx(2 * std::numbers::pi / 3));
    Vec3 mean = Vec3::Zero();
    int octant[8] = {};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Vec3& d = s.directions[i];
        CHECK(std::abs(d.norm() - 1.0) < 1e-9);
        const double phi = s.elevation[i], th = s.azimuth[i];
        CHECK((d - Vec3(std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th), std::cos(phi))).norm() < 1e-12);
        mean += d;
        ++octant[(d.x() > 0) + 2 * (d.y() > 0) + 4 * (d.z() > 0)];
    }
    CHECK((mean / 1024.0).norm() < 0.05);
    for (int o : octant) {
        CHECK(o >= 128 * 0.85);
        CHECK(o <= 128 * 1.15);
    }
    const DirectionSet again = halton_directions(1024);
    CHECK(again.directions == s.directions);
    CHECK(shared_directions(1024) == shared_directions(1024));
}

TEST_CASE("ray distance against a sphere") {
    const World w = big_world({Primitive::sphere(Vec3::Zero(), 1.0)});
    CHECK(w.ray_distance(Vec3(-3, 0, 0), Vec3(1, 0, 0), 10.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(w.ray_distance(Vec3(-3, 0, 0), Vec3(1, 0, 0), 1.5) == 1.5);
    CHECK(w.ray_distance(Vec3(-3, 0, 0), Vec3(-1, 0, 0), 10.0) == 10.0);
    CHECK(w.ray_distance(Vec3(0.2, 0, 0), Vec3(1, 0, 0), 10.0) == 0.0);
    const World empty = big_world({});
    CHECK(empty.ray_distance(Vec3::Zero(), Vec3(0, 0, 1), 5.0) == 5.0);
}

TEST_CASE("rays stop at the closed world boundary") {
    const World w = gen_sphere_box_world(1, 0);
    CHECK(w.ray_distance(Vec3(8, 5, 5), Vec3(1, 0, 0), 5.0) == doctest::Approx(2.0));
}

TEST_CASE("ray distance triangle property along a ray") {
    const World w = gen_sphere_box_world(21, 120);
    const auto set = shared_directions(64);
    Rng rng(2);
    for (int s = 0; s < 200; ++s) {
        const Vec3 x(rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10));
        if (w.occupied(x)) continue;
        const Vec3& r = set->directions[rng.below(64)];
        const double d = w.ray_distance(x, r, 5.0);
        const double t = rng.uniform(0.0, 1.0) * d;
        CHECK(d <= w.ray_distance(x + t * r, r, 5.0) + t + 1e-9);
    }
}

TEST_CASE("bundle from the center of a voxel shell") {
    VoxelGrid g;
    g.dims = {60, 60, 60};
    g.cell_size = 0.1;
    g.origin = Vec3::Zero();
    g.occupied.assign(g.size(), 0);
    const Vec3 c(3.0, 3.0, 3.0);
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 60; ++j)
            for (int k = 0; k < 60; ++k) {
                const double r = (g.cell_center(i, j, k) - c).norm();
                if (r >= 2.0 && r <= 2.3) g.occupied[g.index(i, j, k)] = 1;
            }
    const World w(g);
    const RayBundle b = cast_bundle(w, c, shared_directions(1024), 10.0);
    for (double d : b.distances) {
        CHECK(d > 2.0 - 0.1 * std::sqrt(3.0));
        CHECK(d < 2.0 + 0.1 * std::sqrt(3.0));
    }
}

TEST_CASE("bundles are pure and truncated") {
    const World empty = gen_sphere_box_world(1, 0);
    const RayBundle e = cast_bundle(empty, Vec3(5, 5, 5), shared_directions(256), 4.0);
    for (double d : e.distances) CHECK(d == 4.0);

    const World w = gen_sphere_box_world(4, 150);
    const Vec3 x(5.05, 4.2, 6.3);
    if (!w.occupied(x)) {
        const RayBundle a = cast_bundle(w, x, shared_directions(1024), 5.0);
        const RayBundle b = cast_bundle(w, x, shared_directions(1024), 5.0);
        CHECK(a.distances == b.distances);
        for (std::size_t i = 0; i < a.distances.size(); ++i) {
            CHECK(a.distances[i] > 0.0);
            CHECK(a.distances[i] <= 5.0);
            CHECK(a.distances[i] == w.ray_distance(x, a.set->directions[i], 5.0));
        }
    }
}

TEST_CASE("multiplicative noise") {
    RayBundle b;
    b.set = shared_directions(8);
    b.max_range = 5.0;
    b.distances = {1, 2, 3, 4, 5, 0.5, 0.02, 4.9};
    Rng r0(1);
    CHECK(apply_noise(b, 0.0, r0).distances == b.distances);

    Rng r1(7), r2(7);
    CHECK(apply_noise(b, 0.1, r1).distances == apply_noise(b, 0.1, r2).distances);

    Rng r3(11);
    for (int rep = 0; rep < 2000; ++rep) {
        for (double d : apply_noise(b, 1.0, r3).distances) {
            CHECK(d >= kNoiseFloor);
            CHECK(d <= 5.0);
        }
    }
}

TEST_CASE("noise moment check at sigma 0.3") {
    // L above d so the upper clamp never binds.
    RayBundle b;
    b.set = shared_directions(1);
    b.max_range = 100.0;
    b.distances = {5.0};
    Rng rng(123);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = apply_noise(b, 0.3, rng).distances[0] / 5.0 - 1.0;
        sum += e;
        sq += e * e;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(sd - 0.3) / 0.3 < 0.01);
}
