#pragma once

#include "gridfem/grid.h"

#include <array>
#include <vector>

namespace gridfem {

/// Trilinear B-spline centered at corner k of grid level N:
///   b_k(p) = prod_axis hat(N*p_axis - k_axis),  hat(t) = max(0, 1-|t|).
inline double bspline_value(GridKey corner, const GridLevel& level, const Vec3& p) {
    const auto k = unpack_key(corner);
    double v = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        const double t = level.resolution * p[axis] - k[static_cast<size_t>(axis)];
        v *= std::max(0.0, 1.0 - std::abs(t));
    }
    return v;
}

/// Values and gradients of the 8 corner splines of one voxel at a point,
/// using that voxel's trilinear pieces (gradients on voxel faces follow the
/// fragment's voxel attribution). Corner slot order matches voxel_corners().
struct VoxelShape {
    std::array<double, 8> value;
    std::array<Vec3, 8> gradient;
};

inline VoxelShape voxel_shape(GridKey voxel, const GridLevel& level, const Vec3& p) {
    const auto v = unpack_key(voxel);
    const double N = level.resolution;
    double xi[3], om[3]; // local coordinate and its complement per axis
    for (int axis = 0; axis < 3; ++axis) {
        xi[axis] = N * p[axis] - v[static_cast<size_t>(axis)];
        om[axis] = 1.0 - xi[axis];
    }
    VoxelShape s;
    for (int slot = 0; slot < 8; ++slot) {
        const double fx = (slot & 1) ? xi[0] : om[0];
        const double fy = (slot & 2) ? xi[1] : om[1];
        const double fz = (slot & 4) ? xi[2] : om[2];
        const double sx = (slot & 1) ? N : -N;
        const double sy = (slot & 2) ? N : -N;
        const double sz = (slot & 4) ? N : -N;
        s.value[static_cast<size_t>(slot)] = fx * fy * fz;
        s.gradient[static_cast<size_t>(slot)] = Vec3(sx * fy * fz, fx * sy * fz, fx * fy * sz);
    }
    return s;
}

/// Value and one-sided gradient of b_k at p, attributed to a given voxel.
inline std::pair<double, Vec3> bspline_value_gradient(GridKey corner, GridKey voxel,
                                                      const GridLevel& level, const Vec3& p) {
    const auto k = unpack_key(corner);
    const auto v = unpack_key(voxel);
    const int slot = (k[0] - v[0]) + 2 * (k[1] - v[1]) + 4 * (k[2] - v[2]);
    const VoxelShape s = voxel_shape(voxel, level, p);
    return {s.value[static_cast<size_t>(slot)], s.gradient[static_cast<size_t>(slot)]};
}

/// Two-scale refinement mask of the linear hat over fine corners at offsets
/// (-1, 0, +1) from the coincident fine corner 2k:
///   hat(t/2) = 1/2 hat(t+1) + hat(t) + 1/2 hat(t-1).
/// The quartet mask 1/4 (1 3 3 1) belongs to the quadratic B-spline; it is
/// kept selectable for comparison but does not reproduce trilinear coarse
/// functions exactly.
enum class ProlongationMask { Linear, Quartet };

struct MaskTap {
    int offset;    // fine corner = 2*k + offset
    double weight;
};

inline std::vector<MaskTap> one_dim_mask(ProlongationMask mask = ProlongationMask::Linear) {
    if (mask == ProlongationMask::Linear)
        return {{-1, 0.5}, {0, 1.0}, {1, 0.5}};
    return {{-1, 0.25}, {0, 0.75}, {1, 0.75}, {2, 0.25}};
}

} // namespace gridfem
