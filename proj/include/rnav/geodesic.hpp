#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "rnav/common.hpp"
#include "rnav/rmp.hpp"
#include "rnav/world.hpp"

namespace rnav {

struct FieldOptions {
    double cell_size = 0.1;
    /// Occupied cells are grown by this many cells (26-neighborhood) before solving.
    int dilation_cells = 1;
};

/// Occupancy used by both solvers: the world rasterized at `cell_size`, the
/// closed boundary included, dilated by `dilation_cells`.
VoxelGrid solver_grid(const World& world, const FieldOptions& opt);

/// Shortest obstacle-aware distance to a goal, sampled at cell centers.
/// Unreached and blocked cells hold +infinity.
class GeodesicField {
public:
    GeodesicField() = default;
    GeodesicField(Vec3 goal, std::array<int, 3> dims, double cell_size, Vec3 origin, std::vector<double> values);

    const Vec3& goal() const { return goal_; }
    const std::array<int, 3>& dims() const { return dims_; }
    double cell_size() const { return cell_size_; }
    const Vec3& origin() const { return origin_; }
    const std::vector<double>& values() const { return values_; }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
    }
    double at(int i, int j, int k) const { return values_[index(i, j, k)]; }
    Vec3 cell_center(int i, int j, int k) const { return origin_ + cell_size_ * Vec3(i + 0.5, j + 0.5, k + 0.5); }
    std::array<int, 3> cell_of(const Vec3& p) const;
    bool in_range(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
    }

    /// Trilinear interpolation between cell centers, renormalized over the
    /// reachable corners; nullopt when no corner is reachable.
    std::optional<double> value(const Vec3& p) const;
    bool reachable(const Vec3& p) const { return value(p).has_value(); }

    /// Central differences of the interpolant with step cell_size, one-sided
    /// where a neighbor has no support. Throws FieldQueryError at unsupported points.
    Vec3 gradient(const Vec3& p) const;

    /// Normalized -gradient; zero within one cell of the goal. Throws like gradient().
    Vec3 expert_direction(const Vec3& p) const;

private:
    Vec3 goal_ = Vec3::Zero();
    std::array<int, 3> dims_{0, 0, 0};
    double cell_size_ = 0.1;
    Vec3 origin_ = Vec3::Zero();
    std::vector<double> values_;
};

/// Radius, in cells, of the ball around the goal whose cells (when in line of
/// sight) start from their exact Euclidean distance.
inline constexpr int kExactSeedCells = 15;

/// First-order (Godunov upwind) Fast Marching with unit speed on free cells.
/// Throws GoalInObstacle if the goal is occupied or outside the grid.
GeodesicField compute_field(const VoxelGrid& blocked, const Vec3& goal);
GeodesicField compute_field(const World& world, const Vec3& goal, const FieldOptions& opt = {});

/// 26-connected Dijkstra with Euclidean edge weights; an upper-bound oracle for FMM.
GeodesicField dijkstra_oracle(const VoxelGrid& blocked, const Vec3& goal);
GeodesicField dijkstra_oracle(const World& world, const Vec3& goal, const FieldOptions& opt = {});

/// f = alpha s(-|x_g - x| grad G / |grad G|) - beta xdot, A = I.
Policy geodesic_goal_policy(const RobotState& state, const Vec3& goal, const GeodesicField& field,
                            const GoalParams& p);

/// Follows the field gradient; falls back to the straight goal direction at
/// points without field support (inside the dilated obstacle margin).
class ExpertPlanner final : public Planner {
public:
    ExpertPlanner(std::shared_ptr<const GeodesicField> field, GoalParams p = {})
        : field_(std::move(field)), params_(p) {}
    std::string name() const override { return "expert"; }
    bool can_start(const Vec3& start) const override { return field_->reachable(start); }
    GoalDecision decide(const RobotState& state, const Vec3& goal, const RayBundle& observed) override;

private:
    std::shared_ptr<const GeodesicField> field_;
    GoalParams params_;
};

/// RNGF layout: the RNVX header with magic "RNGF" (version, dims, cell size,
/// origin), 3 x f32 goal, then one f32 per cell in the same order; unreached
/// cells are +inf.
std::string encode_field(const GeodesicField& field);
GeodesicField decode_field(const std::string& bytes);
void write_field(const GeodesicField& field, const std::filesystem::path& path);
GeodesicField read_field(const std::filesystem::path& path);

}  // namespace rnav
