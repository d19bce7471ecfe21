#pragma once

#include "gridfem/fragment.h"

#include <unordered_map>
#include <vector>

namespace gridfem {

enum class Mode { Unaware, Aware };

inline const char* mode_name(Mode m) { return m == Mode::Aware ? "aware" : "unaware"; }

/// Partition of each voxel's fragments into connected components of
/// voxel ∩ surface. Fragments are united when their source faces share a mesh
/// edge or vertex whose clip against the voxel box is nonempty. Components
/// are numbered consecutively, grouped by voxel in sorted-voxel order.
struct VoxelComponents {
    std::vector<int32_t> comp_of_frag; // fragment index -> component id
    std::vector<GridKey> comp_voxel;   // component id -> owning voxel
    std::vector<int32_t> comp_min_frag;

    // CSR: component -> member fragment indices (ascending)
    std::vector<uint32_t> comp_offsets;
    std::vector<uint32_t> comp_frags;

    // CSR: component -> components of nearby voxels it touches (symmetric)
    std::vector<uint32_t> adj_offsets;
    std::vector<uint32_t> adj_list;

    // voxel -> [first component id, end)
    std::unordered_map<GridKey, std::pair<int32_t, int32_t>> voxel_comp_ranges;

    int component_count() const { return static_cast<int>(comp_voxel.size()); }
};

/// Per corner k: the connected components C_k^i of supp(b_k) ∩ surface,
/// obtained by merging the voxel components of the ≤8 support voxels across
/// shared voxel faces. Ordinals are assigned by smallest member fragment id.
struct ComponentTable {
    int depth = 0;
    VoxelComponents voxels;

    std::vector<GridKey> corners;              // active corners, ascending (k_z,k_y,k_x)
    std::vector<uint32_t> corner_comp_offsets; // corner index -> [begin,end); I_k = end-begin

    // CSR over corner components: member voxel-component ids (ascending)
    std::vector<uint32_t> cc_member_offsets;
    std::vector<uint32_t> cc_members;

    // voxel component -> ordinal of its corner component at each of the 8
    // corners of its voxel (slot order matches voxel_corners()).
    std::vector<std::array<int16_t, 8>> comp_corner_ordinal;

    std::unordered_map<GridKey, uint32_t> corner_lookup;

    int corner_count() const { return static_cast<int>(corners.size()); }
    int components_at(uint32_t corner_index) const {
        return static_cast<int>(corner_comp_offsets[corner_index + 1] - corner_comp_offsets[corner_index]);
    }
    /// I_k for a corner key; 0 when the corner's support misses the surface.
    int component_count_at(GridKey corner) const {
        auto it = corner_lookup.find(corner);
        return it == corner_lookup.end() ? 0 : components_at(it->second);
    }
};

VoxelComponents voxel_components(const FragmentLevel& level, const TriangleMesh& mesh);

ComponentTable corner_components(const FragmentLevel& level, const TriangleMesh& mesh);

/// The containment indicator between a coarse corner component (corner ck,
/// ordinal ci at level N) and a fine one (fk, fi at level 2N): 1 iff some
/// fragment of the fine component has its parent fragment inside the coarse
/// component. Exact by the forest's hierarchical construction and equal to
/// the overlap test c ∩ c' ≠ ∅.
int chi(const ComponentTable& coarse, GridKey ck, int ci, const ComponentTable& fine, GridKey fk,
        int fi, const FragmentLevel& fine_level);

/// Dense numbering of active basis functions at one level. Unaware mode:
/// one function per corner whose support meets the surface. Aware mode: one
/// per (corner, component ordinal). Numbering is lexicographic in
/// (k_z, k_y, k_x, i), so the two modes coincide whenever every I_k = 1.
struct BasisIndex {
    Mode mode = Mode::Unaware;
    int depth = 0;
    int dim = 0;
    std::vector<GridKey> basis_corner;
    std::vector<int32_t> basis_ordinal;
    std::unordered_map<GridKey, int32_t> corner_first_id;

    int32_t id_of(GridKey corner, int ordinal) const {
        auto it = corner_first_id.find(corner);
        if (it == corner_first_id.end()) return -1;
        return it->second + (mode == Mode::Aware ? ordinal : 0);
    }
    /// Basis id seen by a fragment at one of its voxel's 8 corner slots.
    int32_t id_for_fragment(const ComponentTable& table, uint32_t frag, GridKey corner,
                            int slot) const {
        if (mode == Mode::Unaware) return id_of(corner, 0);
        const int32_t comp = table.voxels.comp_of_frag[frag];
        return id_of(corner, table.comp_corner_ordinal[static_cast<size_t>(comp)][static_cast<size_t>(slot)]);
    }
};

BasisIndex enumerate_basis(const ComponentTable& table, Mode mode);

} // namespace gridfem
