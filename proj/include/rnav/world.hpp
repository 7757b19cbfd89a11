#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rnav/common.hpp"
#include "rnav/rng.hpp"

namespace rnav {

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    Vec3 extent() const { return max - min; }
    double volume() const { return extent().prod(); }
    bool overlaps(const Aabb& o) const {
        return (min.array() < o.max.array()).all() && (o.min.array() < max.array()).all();
    }
};

/// Entry/exit parameters of a ray against a box, or nullopt on a miss.
std::optional<std::pair<double, double>> ray_box(const Aabb& box, const Vec3& origin, const Vec3& dir);

enum class PrimitiveKind { sphere, box, wall };

const char* to_string(PrimitiveKind kind);

/// Solid obstacle. A wall is a thin box whose thin side is along `axis`.
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::sphere;
    Vec3 center = Vec3::Zero();
    double radius = 0.0;                  // sphere
    Vec3 half_extents = Vec3::Zero();     // box and wall
    int axis = 0;                         // wall normal

    static Primitive sphere(const Vec3& center, double radius);
    static Primitive box(const Vec3& center, const Vec3& half_extents);
    /// `size` holds the full in-plane extents for the two non-normal axes, in axis order.
    static Primitive wall(const Vec3& center, int axis, double thickness, std::array<double, 2> size);

    Aabb aabb() const;
    bool contains(const Vec3& p) const;
    double signed_distance(const Vec3& p) const;
    /// First hit parameter t >= 0 along a unit direction; 0 if origin is inside, kNoHit on a miss.
    double intersect(const Vec3& origin, const Vec3& dir) const;
    /// True if the solid shares interior volume with the box.
    bool overlaps(const Aabb& box) const;

    bool operator==(const Primitive&) const = default;
};

/// Dense occupancy grid; cell (i,j,k) spans origin + [i,i+1)*cell_size etc.
/// Storage is row-major with k fastest.
struct VoxelGrid {
    std::array<int, 3> dims{0, 0, 0};
    double cell_size = 0.1;
    Vec3 origin = Vec3::Zero();
    std::vector<std::uint8_t> occupied;

    std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims[1] + j) * dims[2] + k;
    }
    bool in_range(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }
    Vec3 cell_center(int i, int j, int k) const {
        return origin + cell_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
    }
    std::array<int, 3> cell_of(const Vec3& p) const;
    bool at(int i, int j, int k) const { return occupied[index(i, j, k)] != 0; }
    Aabb bounds() const { return {origin, origin + cell_size * Vec3(dims[0], dims[1], dims[2])}; }
    Aabb cell_box(int i, int j, int k) const {
        const Vec3 lo = origin + cell_size * Vec3(i, j, k);
        return {lo, lo + Vec3::Constant(cell_size)};
    }

    bool operator==(const VoxelGrid&) const = default;
};

/// Grid dimension for an extent, tolerant of floating-point residue (10/0.1 -> 100).
int cells_for(double extent, double cell_size);

enum class WorldKind { sphere_box, plane, imported };

const char* to_string(WorldKind kind);
WorldKind world_kind_from_string(const std::string& s);

/// Size ranges for procedural generation, in meters.
struct WorldGenConfig {
    Aabb bounds{Vec3::Zero(), Vec3::Constant(10.0)};
    double sphere_radius_min = 0.3;
    double sphere_radius_max = 1.0;
    double box_half_min = 0.3;
    double box_half_max = 1.0;
    double wall_thickness = 0.1;
    double wall_extent_min = 1.0;
    double wall_extent_max = 4.0;
    int sphere_box_cap = 200;
    int plane_cap = 100;
    double broadphase_cell = 1.0;
};

/// Closed obstacle scene. Immutable after construction; safe to share between threads.
class World {
public:
    World(const Aabb& bounds, std::vector<Primitive> primitives, std::uint64_t seed, WorldKind kind,
          double broadphase_cell = 1.0);
    /// World backed by an imported occupancy grid.
    explicit World(VoxelGrid grid, std::uint64_t seed = 0);

    const Aabb& bounds() const { return bounds_; }
    const std::vector<Primitive>& primitives() const { return primitives_; }
    std::uint64_t seed() const { return seed_; }
    WorldKind kind() const { return kind_; }
    const std::optional<VoxelGrid>& voxels() const { return voxels_; }

    /// True inside any obstacle and everywhere outside the bounds.
    bool occupied(const Vec3& p) const;

    /// Distance to the first obstacle or the world boundary along unit `dir`,
    /// clamped to `max_range`. Returns 0 when `origin` is occupied.
    double ray_distance(const Vec3& origin, const Vec3& dir, double max_range) const;

    /// Distance from p to the nearest obstacle surface or boundary; <= 0 when occupied.
    /// Voxel worlds search at most `search_radius` meters and saturate there.
    double clearance(const Vec3& p, double search_radius = 2.0) const;

    bool segment_blocked(const Vec3& a, const Vec3& b) const;

    /// Conservative rasterization: a cell is occupied if any obstacle overlaps it.
    VoxelGrid rasterize(double cell_size) const;

private:
    double ray_primitives(const Vec3& origin, const Vec3& dir, double limit) const;
    double ray_voxels(const Vec3& origin, const Vec3& dir, double limit) const;
    void build_broadphase();

    Aabb bounds_;
    std::vector<Primitive> primitives_;
    std::uint64_t seed_ = 0;
    WorldKind kind_ = WorldKind::imported;
    std::optional<VoxelGrid> voxels_;

    double bp_cell_ = 1.0;
    std::array<int, 3> bp_dims_{0, 0, 0};
    std::vector<std::vector<std::uint32_t>> bp_cells_;
};

World gen_sphere_box_world(std::uint64_t seed, int n_obstacles, const WorldGenConfig& cfg = {});
World gen_plane_world(std::uint64_t seed, int n_obstacles, const WorldGenConfig& cfg = {});
World gen_world(WorldKind kind, std::uint64_t seed, int n_obstacles, const WorldGenConfig& cfg = {});

struct StartGoalOptions {
    double min_separation = 3.0;
    bool require_no_los = true;
    double clearance = 0.3;
    int max_attempts = 20000;
};

/// Start and goal in free space with clearance; throws SamplingExhausted
/// when no valid pair turns up within the attempt budget.
std::pair<Vec3, Vec3> sample_start_goal(const World& world, Rng& rng, const StartGoalOptions& opt = {});

/// Uniform point inside the bounds with at least `clearance` to every obstacle.
std::optional<Vec3> sample_free_point(const World& world, Rng& rng, double clearance, int max_attempts);

}  // namespace rnav
