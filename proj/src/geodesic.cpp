#include "rnav/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "rnav/world_io.hpp"

namespace rnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using HeapEntry = std::pair<double, std::uint32_t>;
using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>>;

std::array<int, 3> goal_cell(const VoxelGrid& g, const Vec3& goal) {
    const auto c = g.cell_of(goal);
    if (!g.in_range(c[0], c[1], c[2])) throw GoalInObstacle("goal lies outside the field grid");
    if (g.at(c[0], c[1], c[2])) throw GoalInObstacle("goal lies in an occupied cell");
    return c;
}

}  // namespace

VoxelGrid solver_grid(const World& world, const FieldOptions& opt) {
    if (!(opt.cell_size > 0.0) || opt.dilation_cells < 0) throw ConfigError("invalid field options");
    const VoxelGrid raw = world.rasterize(opt.cell_size);
    if (opt.dilation_cells == 0) return raw;
    VoxelGrid out = raw;
    const int r = opt.dilation_cells;
    const auto& d = raw.dims;
    for (int i = 0; i < d[0]; ++i)
        for (int j = 0; j < d[1]; ++j)
            for (int k = 0; k < d[2]; ++k) {
                auto& cell = out.occupied[raw.index(i, j, k)];
                if (cell) continue;
                // the closed boundary counts as occupied
                if (i < r || j < r || k < r || i >= d[0] - r || j >= d[1] - r || k >= d[2] - r) {
                    cell = 1;
                    continue;
                }
                for (int di = -r; di <= r && !cell; ++di)
                    for (int dj = -r; dj <= r && !cell; ++dj)
                        for (int dk = -r; dk <= r && !cell; ++dk)
                            if (raw.at(i + di, j + dj, k + dk)) cell = 1;
            }
    return out;
}

GeodesicField::GeodesicField(Vec3 goal, std::array<int, 3> dims, double cell_size, Vec3 origin,
                             std::vector<double> values)
    : goal_(std::move(goal)), dims_(dims), cell_size_(cell_size), origin_(std::move(origin)), values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2]) {
        throw ShapeError("field values do not match dims");
    }
}

std::array<int, 3> GeodesicField::cell_of(const Vec3& p) const {
    const Vec3 rel = (p - origin_) / cell_size_;
    return {static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y())),
            static_cast<int>(std::floor(rel.z()))};
}

std::optional<double> GeodesicField::value(const Vec3& p) const {
    const Vec3 u = (p - origin_) / cell_size_ - Vec3::Constant(0.5);
    std::array<int, 3> base{};
    Vec3 frac;
    for (int a = 0; a < 3; ++a) {
        const double fl = std::floor(u[a]);
        base[a] = static_cast<int>(fl);
        frac[a] = u[a] - fl;
        // clamp to the center lattice so points in the outer half-cell extrapolate flat
        if (base[a] < 0) {
            base[a] = 0;
            frac[a] = 0.0;
        } else if (base[a] >= dims_[a] - 1) {
            base[a] = dims_[a] - 1;
            frac[a] = 0.0;
        }
    }
    double acc = 0.0;
    double wsum = 0.0;
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
        const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) * (dk ? frac[2] : 1.0 - frac[2]);
        if (w <= 0.0) continue;
        const int i = std::min(base[0] + di, dims_[0] - 1);
        const int j = std::min(base[1] + dj, dims_[1] - 1);
        const int k = std::min(base[2] + dk, dims_[2] - 1);
        const double v = at(i, j, k);
        if (!std::isfinite(v)) continue;
        acc += w * v;
        wsum += w;
    }
    if (wsum < 1e-9) return std::nullopt;
    return acc / wsum;
}

Vec3 GeodesicField::gradient(const Vec3& p) const {
    const auto v0 = value(p);
    if (!v0) throw FieldQueryError("no reachable field support at query point");
    const double h = cell_size_;
    Vec3 g = Vec3::Zero();
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = h;
        const auto vp = value(p + e);
        const auto vm = value(p - e);
        if (vp && vm) {
            g[a] = (*vp - *vm) / (2.0 * h);
        } else if (vp) {
            g[a] = (*vp - *v0) / h;
        } else if (vm) {
            g[a] = (*v0 - *vm) / h;
        }
    }
    return g;
}

Vec3 GeodesicField::expert_direction(const Vec3& p) const {
    if ((p - goal_).norm() < cell_size_) return Vec3::Zero();
    const Vec3 g = gradient(p);
    const double n = g.norm();
    if (n < 1e-12) throw FieldQueryError("field gradient vanishes at query point");
    return -g / n;
}

namespace {

/// True if every cell the segment passes through is free (sampled at h/8).
bool grid_line_free(const VoxelGrid& g, const Vec3& a, const Vec3& b) {
    const double len = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(8.0 * len / g.cell_size)));
    for (int s = 0; s <= n; ++s) {
        const auto c = g.cell_of(a + (b - a) * (static_cast<double>(s) / n));
        if (!g.in_range(c[0], c[1], c[2]) || g.at(c[0], c[1], c[2])) return false;
    }
    return true;
}

/// A diagonal step may not clip an occupied cell of the box it spans;
/// squeezing through a shared edge or corner touches the obstacle.
bool move_clear(const VoxelGrid& g, int i, int j, int k, int di, int dj, int dk) {
    for (int a = 0; a <= std::abs(di); ++a)
        for (int b = 0; b <= std::abs(dj); ++b)
            for (int c = 0; c <= std::abs(dk); ++c) {
                const int ci = i + (di < 0 ? -a : a), cj = j + (dj < 0 ? -b : b), ck = k + (dk < 0 ? -c : c);
                if (g.at(ci, cj, ck)) return false;
            }
    return true;
}

}  // namespace

GeodesicField compute_field(const VoxelGrid& blocked, const Vec3& goal) {
    const auto gc = goal_cell(blocked, goal);
    const auto& d = blocked.dims;
    const double h = blocked.cell_size;
    std::vector<double> value(blocked.size(), kInf);
    // 0 far, 1 trial, 2 known
    std::vector<std::uint8_t> state(blocked.size(), 0);
    MinHeap heap;

    std::vector<std::uint8_t> near_obstacle(blocked.size(), 0);
    for (int i = 0; i < d[0]; ++i)
        for (int j = 0; j < d[1]; ++j)
            for (int k = 0; k < d[2]; ++k) {
                if (!blocked.at(i, j, k)) continue;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj)
                        for (int dk = -1; dk <= 1; ++dk)
                            if (blocked.in_range(i + di, j + dj, k + dk))
                                near_obstacle[blocked.index(i + di, j + dj, k + dk)] = 1;
            }

    // Cells near the goal with a free straight line to it hold their exact
    // distance; seeding a ball instead of one cell removes most of the
    // point-source error of the first-order update.
    const int R = kExactSeedCells;
    for (int di = -R; di <= R; ++di)
        for (int dj = -R; dj <= R; ++dj)
            for (int dk = -R; dk <= R; ++dk) {
                if (di * di + dj * dj + dk * dk > R * R) continue;
                const int i = gc[0] + di, j = gc[1] + dj, k = gc[2] + dk;
                if (!blocked.in_range(i, j, k) || blocked.at(i, j, k)) continue;
                const Vec3 c = blocked.cell_center(i, j, k);
                if (!grid_line_free(blocked, goal, c)) continue;
                const auto idx = blocked.index(i, j, k);
                value[idx] = (c - goal).norm();
                state[idx] = 1;
                heap.emplace(value[idx], static_cast<std::uint32_t>(idx));
            }

    const std::array<std::array<int, 3>, 6> nbrs{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
    auto known_min = [&](int i, int j, int k, int axis) {
        double m = kInf;
        for (int s : {-1, 1}) {
            std::array<int, 3> c{i, j, k};
            c[axis] += s;
            if (!blocked.in_range(c[0], c[1], c[2])) continue;
            const auto idx = blocked.index(c[0], c[1], c[2]);
            if (state[idx] == 2) m = std::min(m, value[idx]);
        }
        return m;
    };

    while (!heap.empty()) {
        const auto [v, idx] = heap.top();
        heap.pop();
        if (state[idx] == 2 || v != value[idx]) continue;
        state[idx] = 2;
        const int i = static_cast<int>(idx / (static_cast<std::size_t>(d[1]) * d[2]));
        const int j = static_cast<int>((idx / d[2]) % d[1]);
        const int k = static_cast<int>(idx % d[2]);
        // Next to obstacles the face stencil is incomplete, so cells there
        // also take the one-sided update from diagonal neighbors.
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    const int m = di * di + dj * dj + dk * dk;
                    if (m < 2) continue;
                    const int ni = i + di, nj = j + dj, nk = k + dk;
                    if (!blocked.in_range(ni, nj, nk)) continue;
                    const auto nidx = blocked.index(ni, nj, nk);
                    if (state[nidx] == 2 || blocked.occupied[nidx] || !near_obstacle[nidx] ||
                        !move_clear(blocked, i, j, k, di, dj, dk))
                        continue;
                    const double u = v + h * std::sqrt(static_cast<double>(m));
                    if (u < value[nidx]) {
                        value[nidx] = u;
                        state[nidx] = 1;
                        heap.emplace(u, static_cast<std::uint32_t>(nidx));
                    }
                }
        for (const auto& o : nbrs) {
            const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
            if (!blocked.in_range(ni, nj, nk)) continue;
            const auto nidx = blocked.index(ni, nj, nk);
            if (state[nidx] == 2 || blocked.occupied[nidx]) continue;
            std::array<double, 3> a{known_min(ni, nj, nk, 0), known_min(ni, nj, nk, 1), known_min(ni, nj, nk, 2)};
            std::sort(a.begin(), a.end());
            double u = a[0] + h;
            if (u > a[1]) {
                const double diff = a[0] - a[1];
                u = 0.5 * (a[0] + a[1] + std::sqrt(2.0 * h * h - diff * diff));
                if (u > a[2]) {
                    const double s = a[0] + a[1] + a[2];
                    const double q = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
                    u = (s + std::sqrt(s * s - 3.0 * (q - h * h))) / 3.0;
                }
            }
            if (u < value[nidx]) {
                value[nidx] = u;
                state[nidx] = 1;
                heap.emplace(u, static_cast<std::uint32_t>(nidx));
            }
        }
    }
    return GeodesicField(goal, d, h, blocked.origin, std::move(value));
}

GeodesicField compute_field(const World& world, const Vec3& goal, const FieldOptions& opt) {
    if (world.occupied(goal)) throw GoalInObstacle("goal lies inside an obstacle");
    VoxelGrid g = solver_grid(world, opt);
    // dilation never swallows the goal's own cell when the goal itself is free
    const auto c = g.cell_of(goal);
    if (g.in_range(c[0], c[1], c[2])) g.occupied[g.index(c[0], c[1], c[2])] = 0;
    return compute_field(g, goal);
}

GeodesicField dijkstra_oracle(const VoxelGrid& blocked, const Vec3& goal) {
    const auto gc = goal_cell(blocked, goal);
    const auto& d = blocked.dims;
    const double h = blocked.cell_size;
    std::vector<double> value(blocked.size(), kInf);
    std::vector<std::uint8_t> done(blocked.size(), 0);
    MinHeap heap;
    // The goal sits anywhere inside its cell, so its free 26-neighborhood
    // starts from exact distances rather than from the goal cell's center.
    for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
            for (int dk = -1; dk <= 1; ++dk) {
                const int i = gc[0] + di, j = gc[1] + dj, k = gc[2] + dk;
                if (!blocked.in_range(i, j, k) || blocked.at(i, j, k)) continue;
                const Vec3 c = blocked.cell_center(i, j, k);
                if (!grid_line_free(blocked, goal, c)) continue;
                const auto idx = blocked.index(i, j, k);
                value[idx] = (c - goal).norm();
                heap.emplace(value[idx], static_cast<std::uint32_t>(idx));
            }
    while (!heap.empty()) {
        const auto [v, idx] = heap.top();
        heap.pop();
        if (done[idx] || v != value[idx]) continue;
        done[idx] = 1;
        const int i = static_cast<int>(idx / (static_cast<std::size_t>(d[1]) * d[2]));
        const int j = static_cast<int>((idx / d[2]) % d[1]);
        const int k = static_cast<int>(idx % d[2]);
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
                for (int dk = -1; dk <= 1; ++dk) {
                    if (!di && !dj && !dk) continue;
                    const int ni = i + di, nj = j + dj, nk = k + dk;
                    if (!blocked.in_range(ni, nj, nk)) continue;
                    const auto nidx = blocked.index(ni, nj, nk);
                    if (done[nidx] || blocked.occupied[nidx]) continue;
                    if (!move_clear(blocked, i, j, k, di, dj, dk)) continue;
                    const double nv = v + h * std::sqrt(static_cast<double>(di * di + dj * dj + dk * dk));
                    if (nv < value[nidx]) {
                        value[nidx] = nv;
                        heap.emplace(nv, static_cast<std::uint32_t>(nidx));
                    }
                }
    }
    return GeodesicField(goal, d, h, blocked.origin, std::move(value));
}

GeodesicField dijkstra_oracle(const World& world, const Vec3& goal, const FieldOptions& opt) {
    if (world.occupied(goal)) throw GoalInObstacle("goal lies inside an obstacle");
    VoxelGrid g = solver_grid(world, opt);
    const auto c = g.cell_of(goal);
    if (g.in_range(c[0], c[1], c[2])) g.occupied[g.index(c[0], c[1], c[2])] = 0;
    return dijkstra_oracle(g, goal);
}

Policy geodesic_goal_policy(const RobotState& state, const Vec3& goal, const GeodesicField& field,
                            const GoalParams& p) {
    const double dist = (goal - state.x).norm();
    if (dist == 0.0) return directed_goal_policy(state, Vec3::Zero(), p);
    return directed_goal_policy(state, dist * field.expert_direction(state.x), p);
}

GoalDecision ExpertPlanner::decide(const RobotState& state, const Vec3& goal, const RayBundle&) {
    GoalDecision d;
    const Vec3 delta = goal - state.x;
    const double dist = delta.norm();
    Vec3 dir = dist > 0.0 ? Vec3(delta / dist) : Vec3::Zero();
    try {
        if (dist >= field_->cell_size()) dir = field_->expert_direction(state.x);
    } catch (const FieldQueryError&) {
        // inside the dilated margin: keep the straight-line direction
    }
    d.direction = dir;
    d.policy = directed_goal_policy(state, dist * dir, params_);
    return d;
}

std::string encode_field(const GeodesicField& field) {
    ByteWriter w;
    w.bytes("RNGF");
    w.u32(1);
    for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(field.dims()[a]));
    w.f32(static_cast<float>(field.cell_size()));
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(field.origin()[a]));
    for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(field.goal()[a]));
    for (double v : field.values()) w.f32(static_cast<float>(v));
    return w.str();
}

GeodesicField decode_field(const std::string& bytes) {
    ByteReader r(bytes);
    if (r.bytes(4) != "RNGF") throw ParseError("bad field magic at byte offset 0");
    const auto version = r.u32();
    if (version != 1) throw VersionError("field format version " + std::to_string(version) + " is not supported");
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) {
        const auto n = r.u32();
        if (n == 0 || n > (1u << 16)) throw ParseError("field dims out of range");
        dims[a] = static_cast<int>(n);
    }
    const double cell = r.f32();
    Vec3 origin, goal;
    for (int a = 0; a < 3; ++a) origin[a] = r.f32();
    for (int a = 0; a < 3; ++a) goal[a] = r.f32();
    std::vector<double> values(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
    for (double& v : values) v = r.f32();
    if (!r.done()) throw ParseError("trailing bytes after field payload");
    return GeodesicField(goal, dims, cell, origin, std::move(values));
}

void write_field(const GeodesicField& field, const std::filesystem::path& path) { write_file(path, encode_field(field)); }

GeodesicField read_field(const std::filesystem::path& path) { return decode_field(read_file(path)); }

}  // namespace rnav
