#pragma once

#include "gridfem/core.h"

#include <array>
#include <vector>

namespace gridfem {

/// Packed (x,y,z) integer index, 21 bits per axis. Used for both voxels
/// ([0,N)^3) and corners ([0,N]^3).
using GridKey = uint64_t;

inline GridKey pack_key(int x, int y, int z) {
    return (static_cast<uint64_t>(z) << 42) | (static_cast<uint64_t>(y) << 21) |
           static_cast<uint64_t>(x);
}
inline std::array<int, 3> unpack_key(GridKey k) {
    return {static_cast<int>(k & 0x1FFFFF), static_cast<int>((k >> 21) & 0x1FFFFF),
            static_cast<int>((k >> 42) & 0x1FFFFF)};
}

/// One level of the regular grid over the unit cube: N = 2^depth voxels per
/// axis, voxel (i,j,k) spans [i/N,(i+1)/N] x [j/N,(j+1)/N] x [k/N,(k+1)/N].
struct GridLevel {
    int depth = 0;
    int resolution = 1; // N = 2^depth

    explicit GridLevel(int d = 0) : depth(d), resolution(1 << d) {}

    double voxel_size() const { return 1.0 / resolution; }
    Box3 voxel_box(int i, int j, int k) const {
        const double h = voxel_size();
        return {Vec3(i * h, j * h, k * h), Vec3((i + 1) * h, (j + 1) * h, (k + 1) * h)};
    }
    Box3 voxel_box(GridKey key) const {
        const auto v = unpack_key(key);
        return voxel_box(v[0], v[1], v[2]);
    }
    Vec3 corner_position(int x, int y, int z) const {
        const double h = voxel_size();
        return {x * h, y * h, z * h};
    }
    bool valid_voxel(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < resolution && j < resolution && k < resolution;
    }
    bool valid_corner(int x, int y, int z) const {
        return x >= 0 && y >= 0 && z >= 0 && x <= resolution && y <= resolution && z <= resolution;
    }
};

/// The voxels incident to a corner, clamped at the domain boundary: 8 for
/// interior corners, 4 on a face, 2 on an edge, 1 at a domain corner.
inline std::vector<GridKey> corner_support_voxels(GridKey corner, const GridLevel& level) {
    const auto c = unpack_key(corner);
    std::vector<GridKey> out;
    out.reserve(8);
    for (int dz = -1; dz <= 0; ++dz)
        for (int dy = -1; dy <= 0; ++dy)
            for (int dx = -1; dx <= 0; ++dx) {
                const int i = c[0] + dx, j = c[1] + dy, k = c[2] + dz;
                if (level.valid_voxel(i, j, k)) out.push_back(pack_key(i, j, k));
            }
    return out;
}

/// The 8 corners of a voxel, in (z,y,x) minor-to-major bit order: corner
/// slot s has offsets (s&1, (s>>1)&1, (s>>2)&1).
inline std::array<GridKey, 8> voxel_corners(GridKey voxel) {
    const auto v = unpack_key(voxel);
    std::array<GridKey, 8> out;
    for (int s = 0; s < 8; ++s)
        out[static_cast<size_t>(s)] = pack_key(v[0] + (s & 1), v[1] + ((s >> 1) & 1), v[2] + ((s >> 2) & 1));
    return out;
}

} // namespace gridfem
