#include "rnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace rnav {

std::optional<std::pair<double, double>> ray_box(const Aabb& box, const Vec3& origin, const Vec3& dir) {
    double t_near = -kNoHit;
    double t_far = kNoHit;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(dir[a]) < 1e-300) {
            if (origin[a] < box.min[a] || origin[a] > box.max[a]) return std::nullopt;
            continue;
        }
        const double inv = 1.0 / dir[a];
        double t1 = (box.min[a] - origin[a]) * inv;
        double t2 = (box.max[a] - origin[a]) * inv;
        if (t1 > t2) std::swap(t1, t2);
        t_near = std::max(t_near, t1);
        t_far = std::min(t_far, t2);
    }
    if (t_near > t_far || t_far < 0.0) return std::nullopt;
    return std::make_pair(t_near, t_far);
}

const char* to_string(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::sphere: return "sphere";
        case PrimitiveKind::box: return "box";
        case PrimitiveKind::wall: return "wall";
    }
    return "?";
}

const char* to_string(WorldKind kind) {
    switch (kind) {
        case WorldKind::sphere_box: return "sphere_box";
        case WorldKind::plane: return "plane";
        case WorldKind::imported: return "imported";
    }
    return "?";
}

WorldKind world_kind_from_string(const std::string& s) {
    if (s == "sphere_box") return WorldKind::sphere_box;
    if (s == "plane") return WorldKind::plane;
    if (s == "imported") return WorldKind::imported;
    throw ConfigError("unknown world kind '" + s + "'");
}

Primitive Primitive::sphere(const Vec3& center, double radius) {
    Primitive p;
    p.kind = PrimitiveKind::sphere;
    p.center = center;
    p.radius = radius;
    return p;
}

Primitive Primitive::box(const Vec3& center, const Vec3& half_extents) {
    Primitive p;
    p.kind = PrimitiveKind::box;
    p.center = center;
    p.half_extents = half_extents;
    return p;
}

Primitive Primitive::wall(const Vec3& center, int axis, double thickness, std::array<double, 2> size) {
    Primitive p;
    p.kind = PrimitiveKind::wall;
    p.center = center;
    p.axis = axis;
    const int u = axis == 0 ? 1 : 0;
    const int v = axis == 2 ? 1 : 2;
    p.half_extents[axis] = 0.5 * thickness;
    p.half_extents[u] = 0.5 * size[0];
    p.half_extents[v] = 0.5 * size[1];
    return p;
}

Aabb Primitive::aabb() const {
    if (kind == PrimitiveKind::sphere) {
        return {center - Vec3::Constant(radius), center + Vec3::Constant(radius)};
    }
    return {center - half_extents, center + half_extents};
}

bool Primitive::contains(const Vec3& p) const {
    if (kind == PrimitiveKind::sphere) return (p - center).squaredNorm() < radius * radius;
    return ((p - center).cwiseAbs().array() < half_extents.array()).all();
}

double Primitive::signed_distance(const Vec3& p) const {
    if (kind == PrimitiveKind::sphere) return (p - center).norm() - radius;
    const Vec3 q = (p - center).cwiseAbs() - half_extents;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

double Primitive::intersect(const Vec3& origin, const Vec3& dir) const {
    if (kind == PrimitiveKind::sphere) {
        const Vec3 oc = origin - center;
        const double b = oc.dot(dir);
        const double c = oc.squaredNorm() - radius * radius;
        if (c < 0.0) return 0.0;
        const double disc = b * b - c;
        if (disc < 0.0) return kNoHit;
        const double t = -b - std::sqrt(disc);
        return t >= 0.0 ? t : kNoHit;
    }
    const auto hit = ray_box(aabb(), origin, dir);
    if (!hit) return kNoHit;
    if (hit->first <= 0.0) return contains(origin) ? 0.0 : (hit->second > 0.0 ? 0.0 : kNoHit);
    return hit->first;
}

bool Primitive::overlaps(const Aabb& box) const {
    if (kind == PrimitiveKind::sphere) {
        const Vec3 closest = center.cwiseMax(box.min).cwiseMin(box.max);
        return (closest - center).squaredNorm() < radius * radius;
    }
    return aabb().overlaps(box);
}

std::array<int, 3> VoxelGrid::cell_of(const Vec3& p) const {
    const Vec3 rel = (p - origin) / cell_size;
    return {static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y())),
            static_cast<int>(std::floor(rel.z()))};
}

int cells_for(double extent, double cell_size) {
    const double n = extent / cell_size;
    const double r = std::round(n);
    if (std::abs(n - r) < 1e-6 * std::max(1.0, r)) return static_cast<int>(r);
    return static_cast<int>(std::ceil(n));
}

World::World(const Aabb& bounds, std::vector<Primitive> primitives, std::uint64_t seed, WorldKind kind,
             double broadphase_cell)
    : bounds_(bounds), primitives_(std::move(primitives)), seed_(seed), kind_(kind), bp_cell_(broadphase_cell) {
    if (!(bounds_.volume() > 0.0)) throw ConfigError("world bounds must have positive volume");
    if (!(bp_cell_ > 0.0)) throw ConfigError("broad-phase cell must be positive");
    for (std::size_t i = 0; i < primitives_.size(); ++i) {
        const Primitive& p = primitives_[i];
        const bool positive = p.kind == PrimitiveKind::sphere ? p.radius > 0.0 : (p.half_extents.array() > 0.0).all();
        if (!positive) throw ConfigError("primitive " + std::to_string(i) + " has a non-positive size");
        if (!p.aabb().overlaps(bounds_)) {
            throw ConfigError("primitive " + std::to_string(i) + " does not intersect the world bounds");
        }
    }
    build_broadphase();
}

World::World(VoxelGrid grid, std::uint64_t seed) : seed_(seed), kind_(WorldKind::imported) {
    if (grid.dims[0] <= 0 || grid.dims[1] <= 0 || grid.dims[2] <= 0 || !(grid.cell_size > 0.0)) {
        throw ConfigError("voxel grid must have positive dims and cell size");
    }
    if (grid.occupied.size() != grid.size()) throw ShapeError("voxel occupancy size does not match dims");
    bounds_ = grid.bounds();
    voxels_ = std::move(grid);
}

void World::build_broadphase() {
    const Vec3 ext = bounds_.extent();
    for (int a = 0; a < 3; ++a) bp_dims_[a] = std::max(1, static_cast<int>(std::ceil(ext[a] / bp_cell_)));
    bp_cells_.assign(static_cast<std::size_t>(bp_dims_[0]) * bp_dims_[1] * bp_dims_[2], {});
    for (std::uint32_t idx = 0; idx < primitives_.size(); ++idx) {
        const Aabb box = primitives_[idx].aabb();
        std::array<int, 3> lo{}, hi{};
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::clamp(static_cast<int>(std::floor((box.min[a] - bounds_.min[a]) / bp_cell_)), 0, bp_dims_[a] - 1);
            hi[a] = std::clamp(static_cast<int>(std::floor((box.max[a] - bounds_.min[a]) / bp_cell_)), 0, bp_dims_[a] - 1);
        }
        for (int i = lo[0]; i <= hi[0]; ++i)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int k = lo[2]; k <= hi[2]; ++k)
                    bp_cells_[(static_cast<std::size_t>(i) * bp_dims_[1] + j) * bp_dims_[2] + k].push_back(idx);
    }
}

bool World::occupied(const Vec3& p) const {
    if (!bounds_.contains(p)) return true;
    if (voxels_) {
        auto c = voxels_->cell_of(p);
        for (int a = 0; a < 3; ++a) c[a] = std::min(c[a], voxels_->dims[a] - 1);
        return voxels_->at(c[0], c[1], c[2]);
    }
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
        c[a] = std::clamp(static_cast<int>(std::floor((p[a] - bounds_.min[a]) / bp_cell_)), 0, bp_dims_[a] - 1);
    }
    for (std::uint32_t idx : bp_cells_[(static_cast<std::size_t>(c[0]) * bp_dims_[1] + c[1]) * bp_dims_[2] + c[2]]) {
        if (primitives_[idx].contains(p)) return true;
    }
    return false;
}

double World::ray_distance(const Vec3& origin, const Vec3& dir, double max_range) const {
    if (occupied(origin)) return 0.0;
    const auto exit = ray_box(bounds_, origin, dir);
    const double limit = std::min(max_range, exit ? exit->second : 0.0);
    return voxels_ ? ray_voxels(origin, dir, limit) : ray_primitives(origin, dir, limit);
}

double World::ray_primitives(const Vec3& origin, const Vec3& dir, double limit) const {
    double best = limit;
    if (primitives_.empty()) return best;

    // 3D DDA over the broad-phase cells; stop once the best hit lies before the next cell.
    std::array<int, 3> cell{}, step{};
    Vec3 t_max, t_delta;
    for (int a = 0; a < 3; ++a) {
        const double rel = (origin[a] - bounds_.min[a]) / bp_cell_;
        cell[a] = std::clamp(static_cast<int>(std::floor(rel)), 0, bp_dims_[a] - 1);
        if (dir[a] > 0.0) {
            step[a] = 1;
            t_max[a] = (bounds_.min[a] + (cell[a] + 1) * bp_cell_ - origin[a]) / dir[a];
            t_delta[a] = bp_cell_ / dir[a];
        } else if (dir[a] < 0.0) {
            step[a] = -1;
            t_max[a] = (bounds_.min[a] + cell[a] * bp_cell_ - origin[a]) / dir[a];
            t_delta[a] = -bp_cell_ / dir[a];
        } else {
            step[a] = 0;
            t_max[a] = kNoHit;
            t_delta[a] = kNoHit;
        }
    }
    while (true) {
        for (std::uint32_t idx :
             bp_cells_[(static_cast<std::size_t>(cell[0]) * bp_dims_[1] + cell[1]) * bp_dims_[2] + cell[2]]) {
            const double t = primitives_[idx].intersect(origin, dir);
            if (t < best) best = t;
        }
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        const double t_next = t_max[axis];
        if (best <= t_next) break;
        cell[axis] += step[axis];
        if (cell[axis] < 0 || cell[axis] >= bp_dims_[axis]) break;
        t_max[axis] += t_delta[axis];
    }
    return best;
}

double World::ray_voxels(const Vec3& origin, const Vec3& dir, double limit) const {
    const VoxelGrid& g = *voxels_;
    std::array<int, 3> cell = g.cell_of(origin);
    std::array<int, 3> step{};
    Vec3 t_max, t_delta;
    for (int a = 0; a < 3; ++a) {
        cell[a] = std::clamp(cell[a], 0, g.dims[a] - 1);
        if (dir[a] > 0.0) {
            step[a] = 1;
            t_max[a] = (g.origin[a] + (cell[a] + 1) * g.cell_size - origin[a]) / dir[a];
            t_delta[a] = g.cell_size / dir[a];
        } else if (dir[a] < 0.0) {
            step[a] = -1;
            t_max[a] = (g.origin[a] + cell[a] * g.cell_size - origin[a]) / dir[a];
            t_delta[a] = -g.cell_size / dir[a];
        } else {
            step[a] = 0;
            t_max[a] = kNoHit;
            t_delta[a] = kNoHit;
        }
    }
    double t_entry = 0.0;
    while (t_entry < limit) {
        if (g.at(cell[0], cell[1], cell[2])) return std::max(t_entry, 0.0);
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        t_entry = t_max[axis];
        cell[axis] += step[axis];
        if (cell[axis] < 0 || cell[axis] >= g.dims[axis]) break;
        t_max[axis] += t_delta[axis];
    }
    return limit;
}

double World::clearance(const Vec3& p, double search_radius) const {
    if (occupied(p)) {
        if (voxels_ || !bounds_.contains(p)) return 0.0;
        double sd = kNoHit;
        for (const auto& prim : primitives_) sd = std::min(sd, prim.signed_distance(p));
        return std::min(sd, 0.0);
    }
    double d = std::min((p - bounds_.min).minCoeff(), (bounds_.max - p).minCoeff());
    if (voxels_) {
        const VoxelGrid& g = *voxels_;
        const int r = static_cast<int>(std::ceil(search_radius / g.cell_size));
        const auto c = g.cell_of(p);
        for (int i = c[0] - r; i <= c[0] + r; ++i)
            for (int j = c[1] - r; j <= c[1] + r; ++j)
                for (int k = c[2] - r; k <= c[2] + r; ++k) {
                    if (!g.in_range(i, j, k) || !g.at(i, j, k)) continue;
                    const Aabb cb = g.cell_box(i, j, k);
                    const Vec3 q = p.cwiseMax(cb.min).cwiseMin(cb.max);
                    d = std::min(d, (q - p).norm());
                }
        return std::min(d, search_radius);
    }
    for (const auto& prim : primitives_) d = std::min(d, prim.signed_distance(p));
    return d;
}

bool World::segment_blocked(const Vec3& a, const Vec3& b) const {
    const Vec3 delta = b - a;
    const double len = delta.norm();
    if (len == 0.0) return occupied(a);
    return ray_distance(a, delta / len, len) < len;
}

VoxelGrid World::rasterize(double cell_size) const {
    VoxelGrid g;
    g.cell_size = cell_size;
    g.origin = bounds_.min;
    for (int a = 0; a < 3; ++a) g.dims[a] = cells_for(bounds_.extent()[a], cell_size);
    g.occupied.assign(g.size(), 0);
    if (voxels_) {
        for (int i = 0; i < g.dims[0]; ++i)
            for (int j = 0; j < g.dims[1]; ++j)
                for (int k = 0; k < g.dims[2]; ++k) g.occupied[g.index(i, j, k)] = occupied(g.cell_center(i, j, k));
        return g;
    }
    for (const auto& prim : primitives_) {
        const Aabb box = prim.aabb();
        std::array<int, 3> lo{}, hi{};
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::clamp(static_cast<int>(std::floor((box.min[a] - g.origin[a]) / cell_size)), 0, g.dims[a] - 1);
            hi[a] = std::clamp(static_cast<int>(std::floor((box.max[a] - g.origin[a]) / cell_size)), 0, g.dims[a] - 1);
        }
        for (int i = lo[0]; i <= hi[0]; ++i)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int k = lo[2]; k <= hi[2]; ++k) {
                    auto& cell = g.occupied[g.index(i, j, k)];
                    if (!cell && prim.overlaps(g.cell_box(i, j, k))) cell = 1;
                }
    }
    return g;
}

namespace {

Vec3 uniform_in(const Aabb& box, Rng& rng) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = rng.uniform(box.min[a], box.max[a]);
    return p;
}

void warn_over_cap(const char* what, int n, int cap) {
    if (n > cap) std::clog << "warning: " << what << " world with " << n << " obstacles exceeds the cap of " << cap << "\n";
}

}  // namespace

// Draw order per obstacle: kind (below(2): 0 sphere, 1 box), center x/y/z, then
// the radius or the three half-extents.
World gen_sphere_box_world(std::uint64_t seed, int n_obstacles, const WorldGenConfig& cfg) {
    if (n_obstacles < 0) throw ConfigError("n_obstacles must be non-negative");
    warn_over_cap("sphere_box", n_obstacles, cfg.sphere_box_cap);
    Rng rng(seed);
    std::vector<Primitive> prims;
    prims.reserve(static_cast<std::size_t>(n_obstacles));
    for (int i = 0; i < n_obstacles; ++i) {
        const bool is_sphere = rng.below(2) == 0;
        const Vec3 c = uniform_in(cfg.bounds, rng);
        if (is_sphere) {
            prims.push_back(Primitive::sphere(c, rng.uniform(cfg.sphere_radius_min, cfg.sphere_radius_max)));
        } else {
            Vec3 h;
            for (int a = 0; a < 3; ++a) h[a] = rng.uniform(cfg.box_half_min, cfg.box_half_max);
            prims.push_back(Primitive::box(c, h));
        }
    }
    return World(cfg.bounds, std::move(prims), seed, WorldKind::sphere_box, cfg.broadphase_cell);
}

// Draw order per wall: normal axis (below(3)), center x/y/z, then the two
// in-plane extents in increasing axis order.
World gen_plane_world(std::uint64_t seed, int n_obstacles, const WorldGenConfig& cfg) {
    if (n_obstacles < 0) throw ConfigError("n_obstacles must be non-negative");
    warn_over_cap("plane", n_obstacles, cfg.plane_cap);
    Rng rng(seed);
    std::vector<Primitive> prims;
    prims.reserve(static_cast<std::size_t>(n_obstacles));
    for (int i = 0; i < n_obstacles; ++i) {
        const int axis = static_cast<int>(rng.below(3));
        const Vec3 c = uniform_in(cfg.bounds, rng);
        const double u = rng.uniform(cfg.wall_extent_min, cfg.wall_extent_max);
        const double v = rng.uniform(cfg.wall_extent_min, cfg.wall_extent_max);
        prims.push_back(Primitive::wall(c, axis, cfg.wall_thickness, {u, v}));
    }
    return World(cfg.bounds, std::move(prims), seed, WorldKind::plane, cfg.broadphase_cell);
}

World gen_world(WorldKind kind, std::uint64_t seed, int n_obstacles, const WorldGenConfig& cfg) {
    switch (kind) {
        case WorldKind::sphere_box: return gen_sphere_box_world(seed, n_obstacles, cfg);
        case WorldKind::plane: return gen_plane_world(seed, n_obstacles, cfg);
        case WorldKind::imported: break;
    }
    throw ConfigError("cannot generate an imported world");
}

std::optional<Vec3> sample_free_point(const World& world, Rng& rng, double clearance, int max_attempts) {
    const Aabb& b = world.bounds();
    const Aabb inner{b.min + Vec3::Constant(clearance), b.max - Vec3::Constant(clearance)};
    if ((inner.extent().array() <= 0.0).any()) return std::nullopt;
    for (int i = 0; i < max_attempts; ++i) {
        const Vec3 p = uniform_in(inner, rng);
        if (world.clearance(p, clearance) >= clearance) return p;
    }
    return std::nullopt;
}

std::pair<Vec3, Vec3> sample_start_goal(const World& world, Rng& rng, const StartGoalOptions& opt) {
    if (opt.min_separation >= world.bounds().extent().norm()) {
        throw ConfigError("min_separation must be smaller than the world diameter");
    }
    int attempts = 0;
    while (attempts < opt.max_attempts) {
        const auto start = sample_free_point(world, rng, opt.clearance, opt.max_attempts - attempts);
        if (!start) break;
        ++attempts;
        // a few goal candidates per start keep the budget balanced between the two draws
        for (int g = 0; g < 16 && attempts < opt.max_attempts; ++g, ++attempts) {
            const auto goal = sample_free_point(world, rng, opt.clearance, 64);
            if (!goal) continue;
            if ((*goal - *start).norm() < opt.min_separation) continue;
            if (opt.require_no_los && !world.segment_blocked(*start, *goal)) continue;
            return {*start, *goal};
        }
    }
    throw SamplingExhausted("no start/goal pair found after " + std::to_string(opt.max_attempts) +
                            " attempts (world too dense or no occluder)");
}

}  // namespace rnav
