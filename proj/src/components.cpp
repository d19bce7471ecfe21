#include "gridfem/components.h"

#include <algorithm>
#include <cassert>
#include <numeric>

namespace gridfem {

namespace {

constexpr double kTouchTol = 1e-12;

struct UnionFind {
    std::vector<int32_t> parent;
    void reset(size_t n) {
        parent.resize(n);
        std::iota(parent.begin(), parent.end(), 0);
    }
    int32_t find(int32_t x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    }
    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    }
};

uint64_t edge_key(int a, int b) {
    return (static_cast<uint64_t>(std::min(a, b)) << 32) | static_cast<uint64_t>(std::max(a, b));
}

} // namespace

VoxelComponents voxel_components(const FragmentLevel& level, const TriangleMesh& mesh) {
    VoxelComponents out;
    const size_t nfrag = level.frags.size();
    out.comp_of_frag.assign(nfrag, -1);

    const GridLevel grid = level.grid();
    UnionFind uf;

    // Pass 1: components within each voxel.
    std::vector<GridKey> voxels;
    voxels.reserve(level.voxel_ranges.size());
    for (const auto& [key, range] : level.voxel_ranges) voxels.push_back(key);
    std::sort(voxels.begin(), voxels.end());

    std::vector<std::pair<uint64_t, uint32_t>> edge_owner; // reused per voxel
    std::vector<std::pair<int32_t, uint32_t>> vert_owner;
    for (GridKey vkey : voxels) {
        const auto [begin, end] = level.range(vkey);
        const Box3 box = grid.voxel_box(vkey);
        uf.reset(end - begin);
        edge_owner.clear();
        vert_owner.clear();
        for (uint32_t f = begin; f < end; ++f) {
            const auto& tri = mesh.faces[static_cast<size_t>(level.frags[f].face)];
            for (int c = 0; c < 3; ++c) {
                edge_owner.emplace_back(edge_key(tri[static_cast<size_t>(c)], tri[static_cast<size_t>((c + 1) % 3)]), f - begin);
                vert_owner.emplace_back(tri[static_cast<size_t>(c)], f - begin);
            }
        }
        std::sort(edge_owner.begin(), edge_owner.end());
        std::sort(vert_owner.begin(), vert_owner.end());
        for (size_t i = 0; i + 1 < edge_owner.size(); ++i) {
            if (edge_owner[i].first != edge_owner[i + 1].first) continue;
            const int a = static_cast<int>(edge_owner[i].first >> 32);
            const int b = static_cast<int>(edge_owner[i].first & 0xFFFFFFFFu);
            if (segment_meets_box(mesh.vertices[static_cast<size_t>(a)], mesh.vertices[static_cast<size_t>(b)], box, kTouchTol))
                uf.unite(static_cast<int32_t>(edge_owner[i].second), static_cast<int32_t>(edge_owner[i + 1].second));
        }
        for (size_t i = 0; i + 1 < vert_owner.size(); ++i) {
            if (vert_owner[i].first != vert_owner[i + 1].first) continue;
            if (box.contains(mesh.vertices[static_cast<size_t>(vert_owner[i].first)], kTouchTol))
                uf.unite(static_cast<int32_t>(vert_owner[i].second), static_cast<int32_t>(vert_owner[i + 1].second));
        }

        // Assign component ids grouped per voxel, ordered by smallest member fragment.
        const int32_t first_comp = static_cast<int32_t>(out.comp_voxel.size());
        std::vector<int32_t> root_to_comp(end - begin, -1);
        for (uint32_t f = begin; f < end; ++f) {
            const int32_t r = uf.find(static_cast<int32_t>(f - begin));
            if (root_to_comp[static_cast<size_t>(r)] < 0) {
                root_to_comp[static_cast<size_t>(r)] = static_cast<int32_t>(out.comp_voxel.size());
                out.comp_voxel.push_back(vkey);
                out.comp_min_frag.push_back(static_cast<int32_t>(f));
            }
            out.comp_of_frag[f] = root_to_comp[static_cast<size_t>(r)];
        }
        out.voxel_comp_ranges.emplace(vkey, std::pair<int32_t, int32_t>{first_comp, static_cast<int32_t>(out.comp_voxel.size())});
    }

    // Member CSR.
    const int ncomp = out.component_count();
    out.comp_offsets.assign(static_cast<size_t>(ncomp) + 1, 0);
    for (size_t f = 0; f < nfrag; ++f) out.comp_offsets[static_cast<size_t>(out.comp_of_frag[f]) + 1]++;
    for (int c = 0; c < ncomp; ++c) out.comp_offsets[static_cast<size_t>(c) + 1] += out.comp_offsets[static_cast<size_t>(c)];
    out.comp_frags.resize(nfrag);
    {
        std::vector<uint32_t> cursor(out.comp_offsets.begin(), out.comp_offsets.end() - 1);
        for (uint32_t f = 0; f < nfrag; ++f) out.comp_frags[cursor[static_cast<size_t>(out.comp_of_frag[f])]++] = f;
    }

    // Pass 2: adjacency between components of voxels within Chebyshev
    // distance 1, through the (possibly flat) overlap box.
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
    std::vector<std::pair<uint64_t, uint32_t>> their_edges;
    std::vector<std::pair<int32_t, uint32_t>> their_verts;
    for (GridKey vkey : voxels) {
        const auto v = unpack_key(vkey);
        const auto [vb, ve] = level.range(vkey);
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (std::make_tuple(dz, dy, dx) <= std::make_tuple(0, 0, 0)) continue;
                    const int ux = v[0] + dx, uy = v[1] + dy, uz = v[2] + dz;
                    if (!grid.valid_voxel(ux, uy, uz)) continue;
                    const GridKey ukey = pack_key(ux, uy, uz);
                    const auto [ub, ue] = level.range(ukey);
                    if (ub == ue) continue;
                    const Box3 overlap = grid.voxel_box(vkey).intersect(grid.voxel_box(ukey));

                    // Same source face present in both voxels: the two
                    // fragments meet iff the face meets the overlap box.
                    uint32_t i = vb, j = ub;
                    while (i < ve && j < ue) {
                        const int32_t fa = level.frags[i].face, fb = level.frags[j].face;
                        if (fa < fb) ++i;
                        else if (fb < fa) ++j;
                        else {
                            if (poly_meets_box(level.frags[i].poly, overlap, kTouchTol))
                                pairs.emplace_back(static_cast<uint32_t>(out.comp_of_frag[i]), static_cast<uint32_t>(out.comp_of_frag[j]));
                            ++i;
                            ++j;
                        }
                    }

                    // Distinct faces sharing an edge or vertex that meets the overlap.
                    their_edges.clear();
                    their_verts.clear();
                    for (uint32_t f = ub; f < ue; ++f) {
                        const auto& tri = mesh.faces[static_cast<size_t>(level.frags[f].face)];
                        for (int c = 0; c < 3; ++c) {
                            their_edges.emplace_back(edge_key(tri[static_cast<size_t>(c)], tri[static_cast<size_t>((c + 1) % 3)]), f);
                            their_verts.emplace_back(tri[static_cast<size_t>(c)], f);
                        }
                    }
                    std::sort(their_edges.begin(), their_edges.end());
                    std::sort(their_verts.begin(), their_verts.end());
                    for (uint32_t f = vb; f < ve; ++f) {
                        const auto& tri = mesh.faces[static_cast<size_t>(level.frags[f].face)];
                        for (int c = 0; c < 3; ++c) {
                            const int a = tri[static_cast<size_t>(c)], b = tri[static_cast<size_t>((c + 1) % 3)];
                            const uint64_t ek = edge_key(a, b);
                            auto it = std::lower_bound(their_edges.begin(), their_edges.end(),
                                                       std::make_pair(ek, 0u));
                            bool edge_checked = false, edge_meets = false;
                            for (; it != their_edges.end() && it->first == ek; ++it) {
                                const uint32_t g = it->second;
                                if (level.frags[g].face == level.frags[f].face) continue;
                                if (!edge_checked) {
                                    edge_meets = segment_meets_box(mesh.vertices[static_cast<size_t>(a)],
                                                                   mesh.vertices[static_cast<size_t>(b)], overlap, kTouchTol);
                                    edge_checked = true;
                                }
                                if (edge_meets)
                                    pairs.emplace_back(static_cast<uint32_t>(out.comp_of_frag[f]), static_cast<uint32_t>(out.comp_of_frag[g]));
                            }
                            auto vit = std::lower_bound(their_verts.begin(), their_verts.end(),
                                                        std::make_pair(a, 0u));
                            bool vert_checked = false, vert_meets = false;
                            for (; vit != their_verts.end() && vit->first == a; ++vit) {
                                const uint32_t g = vit->second;
                                if (level.frags[g].face == level.frags[f].face) continue;
                                if (!vert_checked) {
                                    vert_meets = overlap.contains(mesh.vertices[static_cast<size_t>(a)], kTouchTol);
                                    vert_checked = true;
                                }
                                if (vert_meets)
                                    pairs.emplace_back(static_cast<uint32_t>(out.comp_of_frag[f]), static_cast<uint32_t>(out.comp_of_frag[g]));
                            }
                        }
                    }
                }
    }
    for (auto& p : pairs)
        if (p.first > p.second) std::swap(p.first, p.second);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    out.adj_offsets.assign(static_cast<size_t>(ncomp) + 1, 0);
    for (const auto& p : pairs) {
        out.adj_offsets[p.first + 1]++;
        out.adj_offsets[p.second + 1]++;
    }
    for (int c = 0; c < ncomp; ++c) out.adj_offsets[static_cast<size_t>(c) + 1] += out.adj_offsets[static_cast<size_t>(c)];
    out.adj_list.resize(pairs.size() * 2);
    {
        std::vector<uint32_t> cursor(out.adj_offsets.begin(), out.adj_offsets.end() - 1);
        for (const auto& p : pairs) {
            out.adj_list[cursor[p.first]++] = p.second;
            out.adj_list[cursor[p.second]++] = p.first;
        }
    }
    return out;
}

ComponentTable corner_components(const FragmentLevel& level, const TriangleMesh& mesh) {
    ComponentTable table;
    table.depth = level.depth;
    table.voxels = voxel_components(level, mesh);
    const VoxelComponents& vc = table.voxels;
    const GridLevel grid = level.grid();

    // Active corners: every corner of every nonempty voxel.
    {
        std::vector<GridKey> corners;
        corners.reserve(vc.voxel_comp_ranges.size() * 8);
        for (const auto& [vkey, range] : vc.voxel_comp_ranges)
            for (GridKey c : voxel_corners(vkey)) corners.push_back(c);
        std::sort(corners.begin(), corners.end());
        corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
        table.corners = std::move(corners);
    }
    table.corner_lookup.reserve(table.corners.size());
    for (uint32_t i = 0; i < table.corners.size(); ++i) table.corner_lookup.emplace(table.corners[i], i);

    table.comp_corner_ordinal.assign(static_cast<size_t>(vc.component_count()), {-1, -1, -1, -1, -1, -1, -1, -1});
    table.corner_comp_offsets.assign(table.corners.size() + 1, 0);
    table.cc_member_offsets.push_back(0);

    std::vector<int32_t> local_comps; // global voxel-component ids in this corner's support
    UnionFind uf;
    for (uint32_t ci = 0; ci < table.corners.size(); ++ci) {
        const GridKey ckey = table.corners[ci];
        local_comps.clear();
        for (GridKey vkey : corner_support_voxels(ckey, grid)) {
            auto it = vc.voxel_comp_ranges.find(vkey);
            if (it == vc.voxel_comp_ranges.end()) continue;
            for (int32_t c = it->second.first; c < it->second.second; ++c) local_comps.push_back(c);
        }
        uf.reset(local_comps.size());
        auto local_of = [&](uint32_t global) -> int32_t {
            for (size_t i = 0; i < local_comps.size(); ++i)
                if (static_cast<uint32_t>(local_comps[i]) == global) return static_cast<int32_t>(i);
            return -1;
        };
        for (size_t i = 0; i < local_comps.size(); ++i) {
            const int32_t c = local_comps[i];
            for (uint32_t a = vc.adj_offsets[static_cast<size_t>(c)]; a < vc.adj_offsets[static_cast<size_t>(c) + 1]; ++a) {
                const int32_t j = local_of(vc.adj_list[a]);
                if (j >= 0) uf.unite(static_cast<int32_t>(i), j);
            }
        }

        // Corner components ordered by smallest member fragment id.
        struct Group {
            int32_t min_frag;
            std::vector<int32_t> members;
        };
        std::vector<int32_t> root_to_group(local_comps.size(), -1);
        std::vector<Group> groups;
        for (size_t i = 0; i < local_comps.size(); ++i) {
            const int32_t r = uf.find(static_cast<int32_t>(i));
            if (root_to_group[static_cast<size_t>(r)] < 0) {
                root_to_group[static_cast<size_t>(r)] = static_cast<int32_t>(groups.size());
                groups.push_back({vc.comp_min_frag[static_cast<size_t>(local_comps[i])], {}});
            }
            Group& g = groups[static_cast<size_t>(root_to_group[static_cast<size_t>(r)])];
            g.min_frag = std::min(g.min_frag, vc.comp_min_frag[static_cast<size_t>(local_comps[i])]);
            g.members.push_back(local_comps[i]);
        }
        std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.min_frag < b.min_frag; });

        const auto ck = unpack_key(ckey);
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            std::sort(groups[gi].members.begin(), groups[gi].members.end());
            for (int32_t m : groups[gi].members) {
                table.cc_members.push_back(static_cast<uint32_t>(m));
                const auto v = unpack_key(vc.comp_voxel[static_cast<size_t>(m)]);
                const int slot = (ck[0] - v[0]) + 2 * (ck[1] - v[1]) + 4 * (ck[2] - v[2]);
                assert(slot >= 0 && slot < 8);
                table.comp_corner_ordinal[static_cast<size_t>(m)][static_cast<size_t>(slot)] = static_cast<int16_t>(gi);
            }
            table.cc_member_offsets.push_back(static_cast<uint32_t>(table.cc_members.size()));
        }
        table.corner_comp_offsets[ci + 1] = table.corner_comp_offsets[ci] + static_cast<uint32_t>(groups.size());
    }
    return table;
}

int chi(const ComponentTable& coarse, GridKey ck, int ci, const ComponentTable& fine, GridKey fk,
        int fi, const FragmentLevel& fine_level) {
    auto it = fine.corner_lookup.find(fk);
    if (it == fine.corner_lookup.end()) return 0;
    const uint32_t corner_index = it->second;
    const uint32_t cc = fine.corner_comp_offsets[corner_index] + static_cast<uint32_t>(fi);
    assert(cc < fine.corner_comp_offsets[corner_index + 1]);
    const auto ckv = unpack_key(ck);
    for (uint32_t m = fine.cc_member_offsets[cc]; m < fine.cc_member_offsets[cc + 1]; ++m) {
        const uint32_t comp = fine.cc_members[m];
        for (uint32_t f = fine.voxels.comp_offsets[comp]; f < fine.voxels.comp_offsets[comp + 1]; ++f) {
            const int32_t parent = fine_level.frags[fine.voxels.comp_frags[f]].parent;
            assert(parent >= 0 && "chi requires consecutive levels with parent links");
            const int32_t pcomp = coarse.voxels.comp_of_frag[static_cast<size_t>(parent)];
            const auto pv = unpack_key(coarse.voxels.comp_voxel[static_cast<size_t>(pcomp)]);
            const int dx = ckv[0] - pv[0], dy = ckv[1] - pv[1], dz = ckv[2] - pv[2];
            if (dx < 0 || dx > 1 || dy < 0 || dy > 1 || dz < 0 || dz > 1) continue; // no witness
            const int slot = dx + 2 * dy + 4 * dz;
            if (coarse.comp_corner_ordinal[static_cast<size_t>(pcomp)][static_cast<size_t>(slot)] == ci) return 1;
        }
    }
    return 0;
}

BasisIndex enumerate_basis(const ComponentTable& table, Mode mode) {
    BasisIndex index;
    index.mode = mode;
    index.depth = table.depth;
    for (uint32_t ci = 0; ci < table.corners.size(); ++ci) {
        const int count = mode == Mode::Aware ? table.components_at(ci) : 1;
        index.corner_first_id.emplace(table.corners[ci], index.dim);
        for (int i = 0; i < count; ++i) {
            index.basis_corner.push_back(table.corners[ci]);
            index.basis_ordinal.push_back(i);
        }
        index.dim += count;
    }
    return index;
}

} // namespace gridfem
