#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "rnav/geodesic.hpp"

using namespace rnav;

namespace {

VoxelGrid empty_grid(int n, double cell) {
    VoxelGrid g;
    g.dims = {n, n, n};
    g.cell_size = cell;
    g.origin = Vec3::Zero();
    g.occupied.assign(g.size(), 0);
    return g;
}

double angle_deg(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

/// Wall at x in [4.9, 5.1] covering y in [0, 7], all z; the gap is at y > 7.
World gap_wall_world() {
    return World(Aabb{Vec3::Zero(), Vec3::Constant(10)}, {Primitive::box(Vec3(5, 3.5, 5), Vec3(0.1, 3.5, 5))}, 0,
                 WorldKind::plane);
}

}  // namespace

TEST_CASE("Dijkstra matches the closed-form 26-connected distance on an empty grid") {
    const VoxelGrid g = empty_grid(16, 0.1);
    const Vec3 goal = g.cell_center(0, 0, 0);
    const GeodesicField d = dijkstra_oracle(g, goal);
    CHECK(d.at(15, 15, 15) == doctest::Approx(15 * std::sqrt(3.0) * 0.1).epsilon(1e-12));
    // Sorted offsets a >= b >= c: sqrt3 c + sqrt2 (b - c) + (a - b).
    CHECK(d.at(15, 7, 3) == doctest::Approx(0.1 * (3 * std::sqrt(3.0) + 4 * std::sqrt(2.0) + 8)).epsilon(1e-12));
    for (int i = 0; i < 16; i += 3)
        for (int j = 0; j < 16; j += 5)
            for (int k = 0; k < 16; k += 2) CHECK(d.at(i, j, k) >= (g.cell_center(i, j, k) - goal).norm() - 1e-12);
}

TEST_CASE("empty world field is Euclidean within 2 percent") {
    const World w = gen_sphere_box_world(1, 0);
    const Vec3 goal(5.05, 5.05, 5.05);
    const GeodesicField f = compute_field(w, goal);
    Rng rng(1);
    for (int s = 0; s < 500; ++s) {
        const Vec3 p(rng.uniform(0.5, 9.5), rng.uniform(0.5, 9.5), rng.uniform(0.5, 9.5));
        const double e = (p - goal).norm();
        if (e < 0.5) continue;
        const auto v = f.value(p);
        REQUIRE(v.has_value());
        CHECK(std::abs(*v - e) / e < 0.02);
        CHECK(angle_deg(-f.gradient(p), goal - p) < 3.0);
    }
    CHECK(f.value(goal).value() < f.cell_size());
    CHECK(f.expert_direction(goal) == Vec3::Zero());
}

TEST_CASE("a wall lengthens the geodesic and bends the gradient toward its edge") {
    const World w = gap_wall_world();
    const Vec3 goal(8, 3, 5);
    const GeodesicField f = compute_field(w, goal);
    const Vec3 p(2, 3, 5);
    const double e = (p - goal).norm();
    CHECK(*f.value(p) > e + 1.0);
    const Vec3 dir = f.expert_direction(p);
    CHECK(dir.dot((goal - p).normalized()) < 0.99);
    CHECK(dir.y() > 0.1);  // toward the open side at y > 7

    const GoalParams gp;
    RobotState s;
    s.x = p;
    const Policy pol = geodesic_goal_policy(s, goal, f, gp);
    CHECK(pol.f.normalized().dot((goal - p).normalized()) < 0.99);
    s.x = goal;
    s.xdot = Vec3(0.2, 0, 0);
    CHECK((geodesic_goal_policy(s, goal, f, gp).f + gp.beta * s.xdot).norm() < 1e-12);
}

TEST_CASE("FMM is sandwiched between Euclidean and Dijkstra on 32^3 worlds") {
    FieldOptions opt;
    opt.cell_size = 10.0 / 32.0;
    opt.dilation_cells = 0;
    // one cell diagonal of discretization slack above the oracle
    const double tol = std::sqrt(3.0) * opt.cell_size;
    double sum = 0.0;
    long cells = 0;
    for (int s = 0; s < 5; ++s) {
        const World w = gen_sphere_box_world(500 + s, 80);
        Rng rng(s);
        const auto goal = sample_free_point(w, rng, 0.3, 10000);
        REQUIRE(goal.has_value());
        const GeodesicField f = compute_field(w, *goal, opt);
        const GeodesicField d = dijkstra_oracle(w, *goal, opt);
        const auto& dims = f.dims();
        for (int i = 0; i < dims[0]; ++i)
            for (int j = 0; j < dims[1]; ++j)
                for (int k = 0; k < dims[2]; ++k) {
                    const double fv = f.at(i, j, k), dv = d.at(i, j, k);
                    REQUIRE(std::isfinite(fv) == std::isfinite(dv));
                    if (!std::isfinite(fv)) continue;
                    const double e = (f.cell_center(i, j, k) - *goal).norm();
                    REQUIRE(e <= fv + 1e-9);
                    REQUIRE(fv <= dv + tol);
                    if (dv > 0) {
                        sum += (dv - fv) / dv;
                        ++cells;
                    }
                }
    }
    // The oracle's own 26-direction anisotropy reaches 11.35% in free space.
    CHECK(sum / cells <= 0.10);
}

TEST_CASE("field invariants: Lipschitz bound and gradient descent reaches the goal") {
    const World w = gen_sphere_box_world(77, 100);
    Rng rng(3);
    const Vec3 goal = *sample_free_point(w, rng, 0.3, 10000);
    const GeodesicField f = compute_field(w, goal);
    const auto& dims = f.dims();
    const double bound = std::sqrt(3.0) * f.cell_size() + 1e-9;
    for (int i = 0; i + 1 < dims[0]; i += 2)
        for (int j = 0; j + 1 < dims[1]; j += 2)
            for (int k = 0; k + 1 < dims[2]; ++k) {
                const double a = f.at(i, j, k);
                if (!std::isfinite(a)) continue;
                CHECK(a >= 0.0);
                for (auto [di, dj, dk] : {std::array{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}) {
                    const double b = f.at(i + di, j + dj, k + dk);
                    if (std::isfinite(b)) CHECK(std::abs(a - b) <= bound);
                }
            }

    int tested = 0;
    while (tested < 100) {
        const auto start = sample_free_point(w, rng, 0.3, 1000);
        if (!start || !f.reachable(*start)) continue;
        ++tested;
        Vec3 x = *start;
        double v = *f.value(x);
        bool reached = false;
        for (int step = 0; step < 4000; ++step) {
            const Vec3 d = f.expert_direction(x);
            if (d == Vec3::Zero() || (x - goal).norm() < 2 * f.cell_size()) {
                reached = true;
                break;
            }
            x += 0.02 * d;
            const auto nv = f.value(x);
            REQUIRE(nv.has_value());
            // Interpolation noise allows tiny local rises.
            CHECK(*nv <= v + 0.01);
            v = std::min(v, *nv);
        }
        CHECK(reached);
    }
}

TEST_CASE("geodesic distance is approximately symmetric") {
    const World w = gen_sphere_box_world(31, 60);
    Rng rng(9);
    int checked = 0;
    while (checked < 10) {
        const auto a = sample_free_point(w, rng, 0.3, 1000);
        const auto b = sample_free_point(w, rng, 0.3, 1000);
        if (!a || !b || (*a - *b).norm() < 2.0) continue;
        const GeodesicField fa = compute_field(w, *a);
        const GeodesicField fb = compute_field(w, *b);
        const auto ab = fb.value(*a), ba = fa.value(*b);
        if (!ab || !ba) continue;
        ++checked;
        CHECK(std::abs(*ab - *ba) / std::max(*ab, *ba) < 0.02);
    }
}

TEST_CASE("goal in an obstacle and unreachable queries raise typed errors") {
    const World w = gap_wall_world();
    CHECK_THROWS_AS(compute_field(w, Vec3(5, 3, 5)), GoalInObstacle);
    CHECK_THROWS_AS(compute_field(w, Vec3(-1, 3, 5)), GoalInObstacle);

    // A sealed box: its inside is unreachable from a goal outside.
    const World sealed(Aabb{Vec3::Zero(), Vec3::Constant(10)},
                       {Primitive::box(Vec3(2, 5, 5), Vec3(1, 1, 0.1)), Primitive::box(Vec3(2, 5, 3), Vec3(1, 1, 0.1)),
                        Primitive::box(Vec3(1, 5, 4), Vec3(0.1, 1, 1)), Primitive::box(Vec3(3, 5, 4), Vec3(0.1, 1, 1)),
                        Primitive::box(Vec3(2, 4, 4), Vec3(1, 0.1, 1)), Primitive::box(Vec3(2, 6, 4), Vec3(1, 0.1, 1))},
                       0, WorldKind::sphere_box);
    const GeodesicField f = compute_field(sealed, Vec3(8, 8, 8));
    CHECK_FALSE(f.reachable(Vec3(2, 5, 4)));
    CHECK_THROWS_AS(f.gradient(Vec3(2, 5, 4)), FieldQueryError);
    ExpertPlanner ex(std::make_shared<const GeodesicField>(f));
    CHECK_FALSE(ex.can_start(Vec3(2, 5, 4)));
    RolloutParams rp;
    Rng rng(1);
    CHECK(rollout(sealed, ex, Vec3(2, 5, 4), Vec3(8, 8, 8), rp, 0.0, rng).status == RolloutStatus::stuck);
}

TEST_CASE("expert matches the baseline in an empty world and escapes the U-trap") {
    const World empty = gen_sphere_box_world(1, 0);
    const Vec3 start(2.5, 5, 5), goal(7.5, 5, 5);
    RolloutParams rp;
    auto field = std::make_shared<const GeodesicField>(compute_field(empty, goal));
    ExpertPlanner ex(field);
    BaselinePlanner base;
    Rng r1(1), r2(1);
    const auto a = rollout(empty, ex, start, goal, rp, 0.0, r1);
    const auto b = rollout(empty, base, start, goal, rp, 0.0, r2);
    CHECK(a.status == RolloutStatus::success);
    CHECK(b.status == RolloutStatus::success);
    CHECK(a.length == doctest::Approx(b.length).epsilon(0.02));

    const World trap(testing::u_trap_grid());
    auto tf = std::make_shared<const GeodesicField>(compute_field(trap, testing::kTrapGoal));
    ExpertPlanner tex(tf);
    Rng r3(1);
    const auto esc = rollout(trap, tex, testing::kTrapStart, testing::kTrapGoal, rp, 0.0, r3);
    CHECK(esc.status == RolloutStatus::success);
    CHECK(esc.min_ray > rp.collision_margin);
}

TEST_CASE("field file round trip") {
    const World w = gen_sphere_box_world(12, 40);
    FieldOptions opt;
    opt.cell_size = 0.25;
    const GeodesicField f = compute_field(w, Vec3(5.1, 4.9, 5.2), opt);
    const std::string bytes = encode_field(f);
    CHECK(bytes.substr(0, 4) == "RNGF");
    const GeodesicField back = decode_field(bytes);
    CHECK(encode_field(back) == bytes);
    CHECK(back.dims() == f.dims());
    for (std::size_t i = 0; i < f.values().size(); ++i) {
        const double a = f.values()[i], b = back.values()[i];
        CHECK(std::isfinite(a) == std::isfinite(b));
        if (std::isfinite(a)) CHECK(b == doctest::Approx(a).epsilon(1e-6));
    }
    CHECK_THROWS_AS(decode_field(bytes.substr(0, 20)), ParseError);
}
