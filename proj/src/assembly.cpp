#include "gridfem/assembly.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace gridfem {

namespace {

struct FragmentBasisIds {
    std::array<int32_t, 8> id;
};

FragmentBasisIds fragment_basis_ids(const ComponentTable& table, const BasisIndex& index,
                                    uint32_t frag, GridKey voxel) {
    FragmentBasisIds out;
    const auto corners = voxel_corners(voxel);
    for (int slot = 0; slot < 8; ++slot) {
        out.id[static_cast<size_t>(slot)] = index.id_for_fragment(table, frag, corners[static_cast<size_t>(slot)], slot);
        assert(out.id[static_cast<size_t>(slot)] >= 0 && "corner of a nonempty voxel must be active");
    }
    return out;
}

} // namespace

SparseSystem assemble(const TriangleMesh& mesh, const FragmentLevel& level,
                      const ComponentTable& table, const BasisIndex& index, double epsilon) {
    SparseSystem sys;
    sys.dim = index.dim;
    sys.depth = level.depth;
    sys.mode = index.mode;
    sys.epsilon = epsilon;

    const GridLevel grid = level.grid();
    const TriangleRule& rule = triangle_rule_degree6();

    std::vector<Vec3> normals(static_cast<size_t>(mesh.face_count()));
    for (int f = 0; f < mesh.face_count(); ++f) normals[static_cast<size_t>(f)] = mesh.face_normal(f);

    std::vector<Eigen::Triplet<double>> lt, mt;
    lt.reserve(level.frags.size() * 64);
    mt.reserve(level.frags.size() * 64);

    for (uint32_t fi = 0; fi < level.frags.size(); ++fi) {
        const Fragment& frag = level.frags[fi];
        const Vec3& n = normals[static_cast<size_t>(frag.face)];
        const FragmentBasisIds ids = fragment_basis_ids(table, index, fi, frag.voxel);

        double lloc[8][8] = {};
        double mloc[8][8] = {};
        for_each_quadrature_point(frag.poly, rule, [&](const Vec3& p, double w) {
            const VoxelShape s = voxel_shape(frag.voxel, grid, p);
            std::array<Vec3, 8> gt;
            for (int a = 0; a < 8; ++a)
                gt[static_cast<size_t>(a)] = s.gradient[static_cast<size_t>(a)] - s.gradient[static_cast<size_t>(a)].dot(n) * n;
            for (int a = 0; a < 8; ++a)
                for (int b = a; b < 8; ++b) {
                    lloc[a][b] += w * gt[static_cast<size_t>(a)].dot(gt[static_cast<size_t>(b)]);
                    mloc[a][b] += w * s.value[static_cast<size_t>(a)] * s.value[static_cast<size_t>(b)];
                }
        });
        for (int a = 0; a < 8; ++a)
            for (int b = a; b < 8; ++b) {
                const int32_t ia = ids.id[static_cast<size_t>(a)];
                const int32_t ib = ids.id[static_cast<size_t>(b)];
                lt.emplace_back(ia, ib, lloc[a][b]);
                mt.emplace_back(ia, ib, mloc[a][b]);
                if (ia != ib) {
                    lt.emplace_back(ib, ia, lloc[a][b]);
                    mt.emplace_back(ib, ia, mloc[a][b]);
                }
            }
    }
    if (epsilon > 0.0)
        for (int i = 0; i < sys.dim; ++i) lt.emplace_back(i, i, epsilon);

    sys.L.resize(sys.dim, sys.dim);
    sys.M.resize(sys.dim, sys.dim);
    sys.L.setFromTriplets(lt.begin(), lt.end());
    sys.M.setFromTriplets(mt.begin(), mt.end());
    return sys;
}

SpMat assemble_mass_tracked(const FragmentLevel& level, const ComponentTable& table,
                            const BasisIndex& index, const std::vector<double>& face_area_ratio) {
    const GridLevel grid = level.grid();
    const TriangleRule& rule = triangle_rule_degree6();
    std::vector<Eigen::Triplet<double>> mt;
    mt.reserve(level.frags.size() * 64);

    for (uint32_t fi = 0; fi < level.frags.size(); ++fi) {
        const Fragment& frag = level.frags[fi];
        const double ratio = face_area_ratio[static_cast<size_t>(frag.face)];
        if (ratio <= 0.0) continue; // degenerated evolved triangle contributes no mass
        const FragmentBasisIds ids = fragment_basis_ids(table, index, fi, frag.voxel);
        double mloc[8][8] = {};
        for_each_quadrature_point(frag.poly, rule, [&](const Vec3& p, double w) {
            const VoxelShape s = voxel_shape(frag.voxel, grid, p);
            for (int a = 0; a < 8; ++a)
                for (int b = a; b < 8; ++b)
                    mloc[a][b] += w * ratio * s.value[static_cast<size_t>(a)] * s.value[static_cast<size_t>(b)];
        });
        for (int a = 0; a < 8; ++a)
            for (int b = a; b < 8; ++b) {
                mt.emplace_back(ids.id[static_cast<size_t>(a)], ids.id[static_cast<size_t>(b)], mloc[a][b]);
                if (a != b) mt.emplace_back(ids.id[static_cast<size_t>(b)], ids.id[static_cast<size_t>(a)], mloc[a][b]);
            }
    }
    SpMat M(index.dim, index.dim);
    M.setFromTriplets(mt.begin(), mt.end());
    return M;
}

std::vector<LoadVectors> load_vectors(const TriangleMesh& mesh, const FragmentLevel& level,
                                      const ComponentTable& table, const BasisIndex& index,
                                      const std::vector<Vector>& vertex_fields) {
    const size_t channels = vertex_fields.size();
    std::vector<LoadVectors> out(channels);
    for (auto& lv : out) {
        lv.f = Vector::Zero(index.dim);
        lv.s = Vector::Zero(index.dim);
    }
    const GridLevel grid = level.grid();
    const TriangleRule& rule = triangle_rule_degree4();

    // Per-face constant gradient and base value of each linear field.
    const int nf = mesh.face_count();
    std::vector<std::vector<Vec3>> grads(channels, std::vector<Vec3>(static_cast<size_t>(nf), Vec3::Zero()));
    std::vector<std::vector<double>> base(channels, std::vector<double>(static_cast<size_t>(nf), 0.0));
    for (int f = 0; f < nf; ++f) {
        const auto& tri = mesh.faces[static_cast<size_t>(f)];
        const Vec3& p0 = mesh.vertices[static_cast<size_t>(tri[0])];
        const Vec3 e1 = mesh.vertices[static_cast<size_t>(tri[1])] - p0;
        const Vec3 e2 = mesh.vertices[static_cast<size_t>(tri[2])] - p0;
        const Vec3 n = mesh.face_normal(f);
        Eigen::Matrix3d A;
        A.row(0) = e1;
        A.row(1) = e2;
        A.row(2) = n;
        if (n.squaredNorm() < 0.5) continue; // degenerate; no fragments reference it
        const Eigen::Matrix3d Ainv = A.inverse();
        for (size_t c = 0; c < channels; ++c) {
            const Vector& field = vertex_fields[c];
            const Vec3 rhs(field[tri[1]] - field[tri[0]], field[tri[2]] - field[tri[0]], 0.0);
            grads[c][static_cast<size_t>(f)] = Ainv * rhs;
            base[c][static_cast<size_t>(f)] = field[tri[0]];
        }
    }

    for (uint32_t fi = 0; fi < level.frags.size(); ++fi) {
        const Fragment& frag = level.frags[fi];
        const Vec3 n = mesh.face_normal(frag.face);
        const Vec3& p0 = mesh.vertices[static_cast<size_t>(mesh.faces[static_cast<size_t>(frag.face)][0])];
        const FragmentBasisIds ids = fragment_basis_ids(table, index, fi, frag.voxel);
        for_each_quadrature_point(frag.poly, rule, [&](const Vec3& p, double w) {
            const VoxelShape s = voxel_shape(frag.voxel, grid, p);
            for (int a = 0; a < 8; ++a) {
                const Vec3 gt = s.gradient[static_cast<size_t>(a)] - s.gradient[static_cast<size_t>(a)].dot(n) * n;
                const int32_t id = ids.id[static_cast<size_t>(a)];
                for (size_t c = 0; c < channels; ++c) {
                    const Vec3& gf = grads[c][static_cast<size_t>(frag.face)];
                    const double fval = base[c][static_cast<size_t>(frag.face)] + gf.dot(p - p0);
                    out[c].f[id] += w * gf.dot(gt);
                    out[c].s[id] += w * fval * s.value[static_cast<size_t>(a)];
                }
            }
        });
    }
    return out;
}

SpMat screened_operator(const SparseSystem& system, double alpha) {
    if (alpha == 0.0) return system.L;
    SpMat A = system.L + alpha * system.M;
    return A;
}

Vector screened_rhs(const LoadVectors& loads, double alpha) { return loads.f + alpha * loads.s; }

std::vector<uint32_t> basis_fragments(const FragmentLevel& level, const ComponentTable& table,
                                      const BasisIndex& index, int32_t basis_id) {
    std::vector<uint32_t> out;
    const GridKey corner = index.basis_corner[static_cast<size_t>(basis_id)];
    if (index.mode == Mode::Aware) {
        const uint32_t ci = table.corner_lookup.at(corner);
        const uint32_t cc = table.corner_comp_offsets[ci] + static_cast<uint32_t>(index.basis_ordinal[static_cast<size_t>(basis_id)]);
        for (uint32_t m = table.cc_member_offsets[cc]; m < table.cc_member_offsets[cc + 1]; ++m) {
            const uint32_t comp = table.cc_members[m];
            for (uint32_t f = table.voxels.comp_offsets[comp]; f < table.voxels.comp_offsets[comp + 1]; ++f)
                out.push_back(table.voxels.comp_frags[f]);
        }
    } else {
        for (GridKey vkey : corner_support_voxels(corner, GridLevel(table.depth))) {
            const auto [b, e] = level.range(vkey);
            for (uint32_t f = b; f < e; ++f) out.push_back(f);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

double integrate_pair(const TriangleMesh& mesh, const FragmentLevel& level,
                      const ComponentTable& table, const BasisIndex& index, int32_t basis_a,
                      int32_t basis_b, PairKind kind) {
    const std::vector<uint32_t> fa = basis_fragments(level, table, index, basis_a);
    const std::vector<uint32_t> fb = basis_fragments(level, table, index, basis_b);
    std::vector<uint32_t> shared;
    std::set_intersection(fa.begin(), fa.end(), fb.begin(), fb.end(), std::back_inserter(shared));

    const GridLevel grid = level.grid();
    const TriangleRule& rule = kind == PairKind::Stiffness ? triangle_rule_degree4() : triangle_rule_degree6();
    const GridKey ka = index.basis_corner[static_cast<size_t>(basis_a)];
    const GridKey kb = index.basis_corner[static_cast<size_t>(basis_b)];

    double total = 0.0;
    for (uint32_t fi : shared) {
        const Fragment& frag = level.frags[fi];
        const Vec3 n = mesh.face_normal(frag.face);
        for_each_quadrature_point(frag.poly, rule, [&](const Vec3& p, double w) {
            const auto [va, ga] = bspline_value_gradient(ka, frag.voxel, grid, p);
            const auto [vb, gb] = bspline_value_gradient(kb, frag.voxel, grid, p);
            if (kind == PairKind::Stiffness) {
                const Vec3 ta = ga - ga.dot(n) * n;
                const Vec3 tb = gb - gb.dot(n) * n;
                total += w * ta.dot(tb);
            } else {
                total += w * va * vb;
            }
        });
    }
    return total;
}

std::vector<VertexStencil> build_vertex_stencils(const TriangleMesh& mesh,
                                                 const FragmentLevel& level,
                                                 const ComponentTable& table,
                                                 const BasisIndex& index) {
    const GridLevel grid = level.grid();
    std::vector<std::vector<uint32_t>> face_frags(static_cast<size_t>(mesh.face_count()));
    for (uint32_t fi = 0; fi < level.frags.size(); ++fi)
        face_frags[static_cast<size_t>(level.frags[fi].face)].push_back(fi);
    std::vector<std::vector<int>> vertex_faces(static_cast<size_t>(mesh.vertex_count()));
    for (int f = 0; f < mesh.face_count(); ++f)
        for (int v : mesh.faces[static_cast<size_t>(f)]) vertex_faces[static_cast<size_t>(v)].push_back(f);

    std::vector<VertexStencil> stencils(static_cast<size_t>(mesh.vertex_count()));
    bool missing_warned = false;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        VertexStencil st;
        const Vec3& p = mesh.vertices[static_cast<size_t>(v)];
        int32_t found = -1;
        for (int f : vertex_faces[static_cast<size_t>(v)]) {
            for (uint32_t fi : face_frags[static_cast<size_t>(f)]) {
                if (level.frags[fi].poly.contains(p, 1e-9)) {
                    found = static_cast<int32_t>(fi);
                    break;
                }
            }
            if (found >= 0) break;
        }
        if (found >= 0) {
            const Fragment& frag = level.frags[static_cast<size_t>(found)];
            const VoxelShape shape = voxel_shape(frag.voxel, grid, p);
            const auto corners = voxel_corners(frag.voxel);
            for (int s = 0; s < 8; ++s) {
                st.id[static_cast<size_t>(s)] = index.id_for_fragment(table, static_cast<uint32_t>(found),
                                                                      corners[static_cast<size_t>(s)], s);
                st.weight[static_cast<size_t>(s)] = shape.value[static_cast<size_t>(s)];
            }
        } else if (!vertex_faces[static_cast<size_t>(v)].empty()) {
            // vertex on degenerate-only geometry: unaware-style voxel fallback
            if (!missing_warned) {
                warn("vertex not covered by any fragment, using voxel fallback");
                missing_warned = true;
            }
            const int N = grid.resolution;
            const GridKey voxel = pack_key(std::clamp(static_cast<int>(std::floor(p.x() * N)), 0, N - 1),
                                           std::clamp(static_cast<int>(std::floor(p.y() * N)), 0, N - 1),
                                           std::clamp(static_cast<int>(std::floor(p.z() * N)), 0, N - 1));
            const VoxelShape shape = voxel_shape(voxel, grid, p);
            const auto corners = voxel_corners(voxel);
            for (int s = 0; s < 8; ++s) {
                st.id[static_cast<size_t>(s)] = index.id_of(corners[static_cast<size_t>(s)], 0);
                st.weight[static_cast<size_t>(s)] = shape.value[static_cast<size_t>(s)];
            }
        }
        stencils[static_cast<size_t>(v)] = st;
    }
    return stencils;
}

void write_matrix_market(const SpMat& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
    char buf[64];
    for (int r = 0; r < matrix.outerSize(); ++r)
        for (SpMat::InnerIterator it(matrix, r); it; ++it) {
            std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", static_cast<int>(it.row()) + 1,
                          static_cast<int>(it.col()) + 1, it.value());
            out << buf;
        }
    if (!out) throw IoError("write failed for " + path);
}

} // namespace gridfem
