#pragma once

#include "rnav/world.hpp"

namespace rnav::testing {

/// Fills cells [i0,i1) x [j0,j1) x [k0,k1).
inline void fill_cells(VoxelGrid& g, int i0, int i1, int j0, int j1, int k0, int k1) {
    for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j)
            for (int k = k0; k < k1; ++k) g.occupied[g.index(i, j, k)] = 1;
}

/// Hand-authored U-shaped trap in a 10 m cube at 0.1 m cells: a box-shaped cup
/// open toward -x whose bottom wall sits between the start and the goal.
/// Interior: x in [3.0, 6.0], y and z in [2.5, 7.5]. Walls are 0.3 m thick.
inline VoxelGrid u_trap_grid() {
    VoxelGrid g;
    g.dims = {100, 100, 100};
    g.cell_size = 0.1;
    g.origin = Vec3::Zero();
    g.occupied.assign(g.size(), 0);
    fill_cells(g, 60, 63, 22, 78, 22, 78);  // bottom
    fill_cells(g, 30, 63, 22, 25, 22, 78);  // -y side
    fill_cells(g, 30, 63, 75, 78, 22, 78);  // +y side
    fill_cells(g, 30, 63, 22, 78, 22, 25);  // -z side
    fill_cells(g, 30, 63, 22, 78, 75, 78);  // +z side
    return g;
}

inline const Vec3 kTrapStart{4.5, 5.0, 5.0};
inline const Vec3 kTrapGoal{8.5, 5.0, 5.0};

/// Authored membership of the trap walls, independent of the grid.
inline bool u_trap_cell(int i, int j, int k) {
    auto in = [](int v, int lo, int hi) { return v >= lo && v < hi; };
    const bool span_x = in(i, 30, 63);
    const bool bottom = in(i, 60, 63) && in(j, 22, 78) && in(k, 22, 78);
    const bool side_y = span_x && (in(j, 22, 25) || in(j, 75, 78)) && in(k, 22, 78);
    const bool side_z = span_x && (in(k, 22, 25) || in(k, 75, 78)) && in(j, 22, 78);
    return bottom || side_y || side_z;
}

}  // namespace rnav::testing
