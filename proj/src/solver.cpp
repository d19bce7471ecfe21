#include "gridfem/solver.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>

namespace gridfem {

namespace {

struct AxisTaps {
    int count = 0;
    std::array<std::pair<int, double>, 4> taps; // (coarse index, weight)
};

AxisTaps axis_taps(int fine_coord, int coarse_resolution, const std::vector<MaskTap>& mask) {
    AxisTaps out;
    for (const MaskTap& tap : mask) {
        const int num = fine_coord - tap.offset;
        if (num % 2 != 0) continue;
        const int kc = num / 2;
        if (kc < 0 || kc > coarse_resolution) continue;
        out.taps[static_cast<size_t>(out.count++)] = {kc, tap.weight};
    }
    return out;
}

} // namespace

ProlongationMatrix build_prolongation(const ComponentTable& coarse_table,
                                      const BasisIndex& coarse_index,
                                      const ComponentTable& fine_table,
                                      const BasisIndex& fine_index,
                                      const FragmentLevel& fine_level, ProlongationMask mask) {
    assert(coarse_index.mode == fine_index.mode);
    ProlongationMatrix out;
    out.mode = fine_index.mode;
    out.coarse_depth = coarse_table.depth;
    out.fine_depth = fine_table.depth;
    const int coarse_res = GridLevel(coarse_table.depth).resolution;
    const std::vector<MaskTap> mask_taps = one_dim_mask(mask);

    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<std::pair<int32_t, GridKey>> witnesses; // (coarse comp, coarse voxel) of a fine component

    for (int32_t row = 0; row < fine_index.dim; ++row) {
        const GridKey fk = fine_index.basis_corner[static_cast<size_t>(row)];
        const auto fkv = unpack_key(fk);
        const AxisTaps tx = axis_taps(fkv[0], coarse_res, mask_taps);
        const AxisTaps ty = axis_taps(fkv[1], coarse_res, mask_taps);
        const AxisTaps tz = axis_taps(fkv[2], coarse_res, mask_taps);

        if (fine_index.mode == Mode::Aware) {
            // Parent voxel components witnessing this fine component.
            witnesses.clear();
            const uint32_t ci = fine_table.corner_lookup.at(fk);
            const uint32_t cc = fine_table.corner_comp_offsets[ci] +
                                static_cast<uint32_t>(fine_index.basis_ordinal[static_cast<size_t>(row)]);
            for (uint32_t m = fine_table.cc_member_offsets[cc]; m < fine_table.cc_member_offsets[cc + 1]; ++m) {
                const uint32_t comp = fine_table.cc_members[m];
                for (uint32_t f = fine_table.voxels.comp_offsets[comp]; f < fine_table.voxels.comp_offsets[comp + 1]; ++f) {
                    const int32_t parent = fine_level.frags[fine_table.voxels.comp_frags[f]].parent;
                    assert(parent >= 0 && "prolongation requires parent links between levels");
                    const int32_t pcomp = coarse_table.voxels.comp_of_frag[static_cast<size_t>(parent)];
                    if (witnesses.empty() || witnesses.back().first != pcomp)
                        witnesses.emplace_back(pcomp, coarse_table.voxels.comp_voxel[static_cast<size_t>(pcomp)]);
                }
            }
            std::sort(witnesses.begin(), witnesses.end());
            witnesses.erase(std::unique(witnesses.begin(), witnesses.end()), witnesses.end());

            for (int ix = 0; ix < tx.count; ++ix)
                for (int iy = 0; iy < ty.count; ++iy)
                    for (int iz = 0; iz < tz.count; ++iz) {
                        const int kx = tx.taps[static_cast<size_t>(ix)].first;
                        const int ky = ty.taps[static_cast<size_t>(iy)].first;
                        const int kz = tz.taps[static_cast<size_t>(iz)].first;
                        const double w = tx.taps[static_cast<size_t>(ix)].second *
                                         ty.taps[static_cast<size_t>(iy)].second *
                                         tz.taps[static_cast<size_t>(iz)].second;
                        int32_t col = -1;
                        for (const auto& [pcomp, pvox] : witnesses) {
                            const auto pv = unpack_key(pvox);
                            const int dx = kx - pv[0], dy = ky - pv[1], dz = kz - pv[2];
                            if (dx < 0 || dx > 1 || dy < 0 || dy > 1 || dz < 0 || dz > 1) continue;
                            const int slot = dx + 2 * dy + 4 * dz;
                            const int ord = coarse_table.comp_corner_ordinal[static_cast<size_t>(pcomp)][static_cast<size_t>(slot)];
                            col = coarse_index.id_of(pack_key(kx, ky, kz), ord);
                            break;
                        }
                        if (col < 0) continue; // tap outside the nesting guarantee (quartet mask)
                        triplets.emplace_back(row, col, w);
                    }
        } else {
            for (int ix = 0; ix < tx.count; ++ix)
                for (int iy = 0; iy < ty.count; ++iy)
                    for (int iz = 0; iz < tz.count; ++iz) {
                        const int32_t col = coarse_index.id_of(
                            pack_key(tx.taps[static_cast<size_t>(ix)].first, ty.taps[static_cast<size_t>(iy)].first,
                                     tz.taps[static_cast<size_t>(iz)].first),
                            0);
                        if (col < 0) continue; // coarse corner support misses the surface
                        const double w = tx.taps[static_cast<size_t>(ix)].second *
                                         ty.taps[static_cast<size_t>(iy)].second *
                                         tz.taps[static_cast<size_t>(iz)].second;
                        triplets.emplace_back(row, col, w);
                    }
        }
    }

    out.P.resize(fine_index.dim, coarse_index.dim);
    out.P.setFromTriplets(triplets.begin(), triplets.end());

    // The Observation guarantees every fine component a coarse parent; an
    // empty row signals an internal inconsistency.
    for (int32_t row = 0; row < fine_index.dim; ++row) {
        if (out.P.outerIndexPtr()[row] == out.P.outerIndexPtr()[row + 1]) {
            const auto k = unpack_key(fine_index.basis_corner[static_cast<size_t>(row)]);
            throw NumericalError("prolongation: orphan fine component at corner (" +
                                 std::to_string(k[0]) + "," + std::to_string(k[1]) + "," +
                                 std::to_string(k[2]) + ") ordinal " +
                                 std::to_string(fine_index.basis_ordinal[static_cast<size_t>(row)]));
        }
    }
    return out;
}

NestingCheck check_prolongation_exactness(const TriangleMesh& mesh, const FragmentLevel& coarse_level,
                                          const ComponentTable& coarse_table, const BasisIndex& coarse_index,
                                          const FragmentLevel& fine_level, const ComponentTable& fine_table,
                                          const BasisIndex& fine_index, const SpMat& P,
                                          int points_per_basis, uint64_t seed) {
    (void)mesh;
    (void)coarse_level;
    NestingCheck check;
    const GridLevel coarse_grid(coarse_table.depth);
    const GridLevel fine_grid(fine_table.depth);

    // Fine fragments grouped by the coarse voxel component of their parent.
    std::vector<std::vector<uint32_t>> frags_of_coarse_comp(static_cast<size_t>(coarse_table.voxels.component_count()));
    for (uint32_t f = 0; f < fine_level.frags.size(); ++f) {
        const int32_t parent = fine_level.frags[f].parent;
        assert(parent >= 0);
        frags_of_coarse_comp[static_cast<size_t>(coarse_table.voxels.comp_of_frag[static_cast<size_t>(parent)])].push_back(f);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<uint32_t> candidates;
    std::vector<double> cum_area;
    for (int32_t col = 0; col < coarse_index.dim; ++col) {
        const GridKey ck = coarse_index.basis_corner[static_cast<size_t>(col)];
        candidates.clear();
        cum_area.clear();
        if (coarse_index.mode == Mode::Aware) {
            const uint32_t ci = coarse_table.corner_lookup.at(ck);
            const uint32_t cc = coarse_table.corner_comp_offsets[ci] +
                                static_cast<uint32_t>(coarse_index.basis_ordinal[static_cast<size_t>(col)]);
            for (uint32_t m = coarse_table.cc_member_offsets[cc]; m < coarse_table.cc_member_offsets[cc + 1]; ++m)
                for (uint32_t f : frags_of_coarse_comp[static_cast<size_t>(coarse_table.cc_members[m])]) candidates.push_back(f);
        } else {
            for (GridKey vkey : corner_support_voxels(ck, coarse_grid)) {
                auto it = coarse_table.voxels.voxel_comp_ranges.find(vkey);
                if (it == coarse_table.voxels.voxel_comp_ranges.end()) continue;
                for (int32_t comp = it->second.first; comp < it->second.second; ++comp)
                    for (uint32_t f : frags_of_coarse_comp[static_cast<size_t>(comp)]) candidates.push_back(f);
            }
        }
        if (candidates.empty()) continue;
        double total = 0.0;
        for (uint32_t f : candidates) {
            total += fine_level.frags[f].area;
            cum_area.push_back(total);
        }

        for (int s = 0; s < points_per_basis; ++s) {
            const double pick = unit(rng) * total;
            const size_t fc = static_cast<size_t>(std::lower_bound(cum_area.begin(), cum_area.end(), pick) - cum_area.begin());
            const Fragment& frag = fine_level.frags[candidates[std::min(fc, candidates.size() - 1)]];

            // Uniform point in the polygon: area-weighted fan triangle, then
            // uniform barycentric.
            double fan_total = 0.0;
            Vec3 p = frag.poly.centroid();
            {
                std::vector<double> fan_cum;
                for (int i = 1; i + 1 < frag.poly.n; ++i) {
                    fan_total += 0.5 * (frag.poly[i] - frag.poly[0]).cross(frag.poly[i + 1] - frag.poly[0]).norm();
                    fan_cum.push_back(fan_total);
                }
                const double tpick = unit(rng) * fan_total;
                const size_t ti = static_cast<size_t>(std::lower_bound(fan_cum.begin(), fan_cum.end(), tpick) - fan_cum.begin());
                const int i = static_cast<int>(std::min(ti, fan_cum.size() - 1)) + 1;
                double r1 = std::sqrt(unit(rng)), r2 = unit(rng);
                p = (1.0 - r1) * frag.poly[0] + r1 * (1.0 - r2) * frag.poly[i] + r1 * r2 * frag.poly[i + 1];
            }

            const double lhs = bspline_value(ck, coarse_grid, p);
            double rhs = 0.0;
            const auto fine_corners = voxel_corners(frag.voxel);
            const VoxelShape shape = voxel_shape(frag.voxel, fine_grid, p);
            const uint32_t frag_index = static_cast<uint32_t>(&frag - fine_level.frags.data());
            for (int slot = 0; slot < 8; ++slot) {
                const int32_t fid = fine_index.id_for_fragment(fine_table, frag_index, fine_corners[static_cast<size_t>(slot)], slot);
                if (fid < 0) continue;
                rhs += P.coeff(fid, col) * shape.value[static_cast<size_t>(slot)];
            }
            check.max_error = std::max(check.max_error, std::abs(lhs - rhs));
            ++check.points;
        }
    }
    return check;
}

void gauss_seidel(const SpMat& A, Vector& u, const Vector& rhs, int sweeps) {
    static bool warned = false;
    const int n = static_cast<int>(A.rows());
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (int i = 0; i < n; ++i) {
            double diag = 0.0, sum = rhs[i];
            for (SpMat::InnerIterator it(A, i); it; ++it) {
                if (it.col() == i)
                    diag = it.value();
                else
                    sum -= it.value() * u[it.col()];
            }
            if (diag == 0.0) {
                if (!warned) {
                    warn("gauss_seidel: zero diagonal, row skipped");
                    warned = true;
                }
                continue;
            }
            u[i] = sum / diag;
        }
    }
}

CgResult cg_solve(const SpMat& A, const Vector& rhs, Vector& u, double tol, int max_iter) {
    // Jacobi-preconditioned; the diagonal scaling tames the wide range of
    // fragment areas behind the basis functions.
    CgResult result;
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        u.setZero();
        result.converged = true;
        return result;
    }
    Vector dinv(A.rows());
    const double dmax = A.diagonal().maxCoeff();
    for (int i = 0; i < A.rows(); ++i) {
        // clamp so near-zero rows (sliver-support basis functions) do not
        // dominate the preconditioned search directions
        const double d = std::max(A.coeff(i, i), 1e-14 * std::max(dmax, 0.0));
        dinv[i] = d > 0.0 ? 1.0 / d : 1.0;
    }
    Vector r = rhs - A * u;
    Vector z = dinv.cwiseProduct(r);
    Vector p = z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iter; ++it) {
        if (r.norm() / rhs_norm <= tol) break;
        const Vector Ap = A * p;
        const double pAp = p.dot(Ap);
        if (!std::isfinite(pAp)) throw NumericalError("cg_solve: NaN encountered");
        // numerically null direction: stepping along it would blast the
        // iterate into the operator's kernel; stop with the current iterate
        if (pAp <= 1e-28 * std::max(dmax, 1e-300) * p.squaredNorm()) break;
        const double alpha = rz / pAp;
        u += alpha * p;
        r -= alpha * Ap;
        z = dinv.cwiseProduct(r);
        const double rz_new = r.dot(z);
        if (!std::isfinite(rz_new)) throw NumericalError("cg_solve: NaN encountered");
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        result.iterations = it + 1;
    }
    result.rel_residual = r.norm() / rhs_norm;
    result.converged = result.rel_residual <= tol;
    return result;
}

ReferenceSolveResult reference_solve(const SpMat& A, const Vector& rhs, double tol, int max_iter) {
    ReferenceSolveResult out;
    const int n = static_cast<int>(A.rows());
    if (n <= 2000) {
        Eigen::MatrixXd dense(A);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(dense);
        const Vector d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * dmax) {
            out.singular = true;
            out.u = Vector::Zero(n);
            return out;
        }
        out.u = ldlt.solve(rhs);
        out.converged = true;
        return out;
    }
    out.u = Vector::Zero(n);
    const CgResult cg = cg_solve(A, rhs, out.u, tol, max_iter);
    out.converged = cg.converged;
    return out;
}

MultigridHierarchy build_hierarchy(const TriangleMesh& mesh, const FragmentForest& forest,
                                   int min_depth, int max_depth, Mode mode, double epsilon,
                                   bool galerkin, ProlongationMask mask) {
    if (!forest.has_depth(min_depth) || !forest.has_depth(max_depth) || min_depth > max_depth)
        throw IoError("build_hierarchy: depth range not covered by the forest");
    MultigridHierarchy h;
    h.mode = mode;
    h.min_depth = min_depth;
    h.max_depth = max_depth;
    for (int depth = min_depth; depth <= max_depth; ++depth) {
        HierarchyLevel level;
        level.depth = depth;
        level.table = corner_components(forest.level_at(depth), mesh);
        level.index = enumerate_basis(level.table, mode);
        level.system = assemble(mesh, forest.level_at(depth), level.table, level.index, epsilon);
        if (depth > min_depth) {
            const HierarchyLevel& coarse = h.levels.back();
            level.P = build_prolongation(coarse.table, coarse.index, level.table, level.index,
                                         forest.level_at(depth), mask)
                          .P;
        }
        h.levels.push_back(std::move(level));
    }
    if (galerkin) {
        for (int l = h.level_count() - 2; l >= 0; --l) {
            const SpMat& P = h.levels[static_cast<size_t>(l) + 1].P;
            h.levels[static_cast<size_t>(l)].system.L = SpMat(P.transpose() * h.levels[static_cast<size_t>(l) + 1].system.L * P);
            h.levels[static_cast<size_t>(l)].system.M = SpMat(P.transpose() * h.levels[static_cast<size_t>(l) + 1].system.M * P);
        }
    }
    return h;
}

std::vector<SpMat> screened_operators(const MultigridHierarchy& hierarchy, double alpha) {
    std::vector<SpMat> ops;
    ops.reserve(hierarchy.levels.size());
    for (const HierarchyLevel& level : hierarchy.levels) ops.push_back(screened_operator(level.system, alpha));
    return ops;
}

MultigridSolver::MultigridSolver(std::vector<SpMat> per_level_operators,
                                 const MultigridHierarchy& hierarchy, CycleConfig config)
    : A_(std::move(per_level_operators)), config_(config) {
    assert(static_cast<int>(A_.size()) == hierarchy.level_count());
    P_.resize(A_.size(), nullptr);
    for (size_t l = 1; l < A_.size(); ++l) P_[l] = &hierarchy.levels[l].P;
}

MultigridSolver::MultigridSolver(std::vector<SpMat> per_level_operators,
                                 std::vector<const SpMat*> prolongations, CycleConfig config)
    : A_(std::move(per_level_operators)), P_(std::move(prolongations)), config_(config) {
    assert(P_.size() == A_.size());
}

void MultigridSolver::coarse_solve(Vector& u, const Vector& rhs) const {
    const SpMat& A = A_.front();
    if (A.rows() <= config_.coarse_direct_dim) {
        if (!coarse_factor_tried_) {
            coarse_factor_tried_ = true;
            Eigen::MatrixXd dense(A);
            coarse_factor_.emplace(dense);
            const Vector d = coarse_factor_->vectorD();
            coarse_factor_usable_ = coarse_factor_->info() == Eigen::Success &&
                                    d.minCoeff() > 1e-12 * d.cwiseAbs().maxCoeff();
        }
        if (coarse_factor_usable_) {
            u = coarse_factor_->solve(rhs);
            return;
        }
    }
    gauss_seidel(A, u, rhs, config_.coarse_sweeps);
}

void MultigridSolver::recurse(int level, Vector& u, const Vector& rhs, CycleStats& stats) const {
    if (level == 0) {
        coarse_solve(u, rhs);
        const Vector r = rhs - A_[0] * u;
        stats.pre_residual[0] = stats.post_residual[0] = r.norm();
        return;
    }
    const SpMat& A = A_[static_cast<size_t>(level)];
    const SpMat& P = *P_[static_cast<size_t>(level)];

    gauss_seidel(A, u, rhs, config_.smooth_iterations);
    Vector r = rhs - A * u;
    stats.pre_residual[static_cast<size_t>(level)] = r.norm();

    const Vector rc = P.transpose() * r;
    Vector e = Vector::Zero(P.cols());
    const int repeats = config_.shape == CycleShape::W ? 2 : 1;
    for (int rep = 0; rep < repeats; ++rep) recurse(level - 1, e, rc, stats);
    u += P * e;

    gauss_seidel(A, u, rhs, config_.smooth_iterations);
    stats.post_residual[static_cast<size_t>(level)] = (rhs - A * u).norm();
}

CycleStats MultigridSolver::cycle(Vector& u, const Vector& rhs) const {
    CycleStats stats;
    stats.pre_residual.assign(A_.size(), 0.0);
    stats.post_residual.assign(A_.size(), 0.0);
    if (A_.size() == 1) {
        // min_depth == max_depth: plain Gauss-Seidel relaxation at the finest level
        gauss_seidel(A_[0], u, rhs, 2 * config_.smooth_iterations);
        stats.pre_residual[0] = stats.post_residual[0] = (rhs - A_[0] * u).norm();
        return stats;
    }
    recurse(level_count() - 1, u, rhs, stats);
    return stats;
}

double MultigridSolver::solve(Vector& u, const Vector& rhs, double tol, int max_cycles) const {
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        u.setZero();
        return 0.0;
    }
    double rel = (rhs - A_.back() * u).norm() / rhs_norm;
    for (int c = 0; c < max_cycles && rel > tol; ++c) {
        cycle(u, rhs);
        rel = (rhs - A_.back() * u).norm() / rhs_norm;
        if (!std::isfinite(rel)) throw NumericalError("multigrid: non-finite residual");
    }
    return rel;
}

} // namespace gridfem
