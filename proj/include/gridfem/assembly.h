#pragma once

#include "gridfem/bspline.h"
#include "gridfem/components.h"
#include "gridfem/quadrature.h"

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace gridfem {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Assembled stiffness and mass in one basis. L stores the positive
/// semi-definite Dirichlet form +∫⟨∇b_i, ∇b_j⟩ (gradients projected onto the
/// surface tangent plane); downstream equations are written for PSD L.
struct SparseSystem {
    SpMat L;
    SpMat M;
    int dim = 0;
    int depth = 0;
    Mode mode = Mode::Unaware;
    double epsilon = 0.0;
};

enum class PairKind { Stiffness, Mass };

/// Full assembly by a single sweep over fragments, scattering per-fragment
/// 8x8 corner blocks (mapped through components in aware mode). The upper
/// triangle is mirrored, so L and M are symmetric exactly. When epsilon > 0,
/// L gains epsilon on its diagonal, which keeps axis-aligned planar geometry
/// from leaving the system singular.
SparseSystem assemble(const TriangleMesh& mesh, const FragmentLevel& level,
                      const ComponentTable& table, const BasisIndex& index, double epsilon = 0.0);

/// Mass matrix with tracked quadrature: integration points stay in the
/// material domain while each face's surface measure is scaled by
/// face_area_ratio[face] (evolved / original area of the piecewise-linear
/// evolved embedding). assemble() equals ratios all one.
SpMat assemble_mass_tracked(const FragmentLevel& level, const ComponentTable& table,
                            const BasisIndex& index, const std::vector<double>& face_area_ratio);

/// Gradient (f) and value (s) load vectors of a piecewise-linear per-vertex
/// field:  f_i = ∫⟨∇f, ∇b_i⟩,  s_i = ∫ f·b_i.
struct LoadVectors {
    Vector f;
    Vector s;
};

/// One LoadVectors per channel. vertex_fields[c] has one value per vertex.
std::vector<LoadVectors> load_vectors(const TriangleMesh& mesh, const FragmentLevel& level,
                                      const ComponentTable& table, const BasisIndex& index,
                                      const std::vector<Vector>& vertex_fields);

/// Screened-Poisson operator L + alpha*M and right-hand side f + alpha*s.
SpMat screened_operator(const SparseSystem& system, double alpha);
Vector screened_rhs(const LoadVectors& loads, double alpha);

/// Member fragments of one basis function: the fragments of its component
/// (aware) or of every support voxel (unaware), ascending.
std::vector<uint32_t> basis_fragments(const FragmentLevel& level, const ComponentTable& table,
                                      const BasisIndex& index, int32_t basis_id);

/// Direct integration of one entry over the shared fragments of a pair, with
/// the degree-4 (stiffness) or degree-6 (mass) rule. Matches the assembled
/// entry; exists as an independently callable route for oracle checks.
double integrate_pair(const TriangleMesh& mesh, const FragmentLevel& level,
                      const ComponentTable& table, const BasisIndex& index, int32_t basis_a,
                      int32_t basis_b, PairKind kind);

/// Matrix Market coordinate format (general, 1-based, row-sorted).
void write_matrix_market(const SpMat& matrix, const std::string& path);

/// Frozen evaluation of a coefficient field at one surface point: the 8
/// corner-spline weights of the fragment's voxel, mapped to basis ids
/// (component-resolved in aware mode).
struct VertexStencil {
    std::array<int32_t, 8> id{-1, -1, -1, -1, -1, -1, -1, -1};
    std::array<double, 8> weight{};

    double evaluate(const Vector& u) const {
        double v = 0.0;
        for (int s = 0; s < 8; ++s)
            if (id[static_cast<size_t>(s)] >= 0) v += weight[static_cast<size_t>(s)] * u[id[static_cast<size_t>(s)]];
        return v;
    }
};

/// One stencil per mesh vertex, located through a fragment of an incident
/// face (which resolves the component a vertex belongs to in aware mode).
std::vector<VertexStencil> build_vertex_stencils(const TriangleMesh& mesh,
                                                 const FragmentLevel& level,
                                                 const ComponentTable& table,
                                                 const BasisIndex& index);

} // namespace gridfem
