#pragma once

#include "gridfem/clip.h"
#include "gridfem/grid.h"
#include "gridfem/mesh.h"

#include <string>
#include <unordered_map>
#include <vector>

namespace gridfem {

/// One planar piece of a mesh face inside one voxel: polygon = face ∩ voxel.
/// Children at the next depth are clipped from this polygon, so a parent
/// geometrically contains its children by construction.
struct Fragment {
    GridKey voxel = 0;
    int32_t face = -1;
    int32_t parent = -1; // index into the previous level's fragment list, -1 at the root level
    ConvexPoly poly;
    double area = 0.0;
};

struct FragmentLevel {
    int depth = 0;
    std::vector<Fragment> frags; // sorted by (voxel, face)
    // voxel -> [begin, end) into frags
    std::unordered_map<GridKey, std::pair<uint32_t, uint32_t>> voxel_ranges;

    GridLevel grid() const { return GridLevel(depth); }
    std::pair<uint32_t, uint32_t> range(GridKey voxel) const {
        auto it = voxel_ranges.find(voxel);
        if (it == voxel_ranges.end()) return {0, 0};
        return it->second;
    }
};

/// Per-level fragment collections with parent links across consecutive
/// depths. Immutable once built; levels[i] has depth min_depth + i.
struct FragmentForest {
    int min_depth = 0;
    int max_depth = 0;
    std::vector<FragmentLevel> levels;

    const FragmentLevel& level_at(int depth) const { return levels[static_cast<size_t>(depth - min_depth)]; }
    bool has_depth(int depth) const { return depth >= min_depth && depth <= max_depth; }
};

/// Clips whole triangles at min_depth, then clips parent fragments against
/// the 8 child voxels at every finer depth. Geometry lying exactly on a
/// shared voxel plane is attributed to the voxel whose min-face carries it;
/// zero-area fragments (area < 1e-14) are discarded. Degenerate faces
/// produce no fragments.
FragmentForest build_fragment_forest(const TriangleMesh& mesh, int max_depth, int min_depth = 0);

/// Byte-stable binary serialization; two identical builds serialize
/// identically. The cache key is (mesh hash, min_depth, max_depth, pad).
void save_forest_cache(const FragmentForest& forest, const std::string& path, uint64_t mesh_hash,
                       double pad);
/// Returns an empty optional when the file is missing or the key mismatches.
std::optional<FragmentForest> load_forest_cache(const std::string& path, uint64_t mesh_hash,
                                                int max_depth, int min_depth, double pad);

/// Sum of fragment areas at one depth (for the area-conservation invariant).
double level_area(const FragmentLevel& level);

} // namespace gridfem
