#pragma once

#include "gridfem/core.h"

#include <Eigen/SparseCore>
#include <array>
#include <optional>
#include <string>
#include <vector>

namespace gridfem {

/// Indexed triangle surface. Vertices are world units until normalize() maps
/// them into the unit cube. A mesh value is immutable by convention once it
/// enters the pipeline; all operations below are pure.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> colors;             // optional, RGB in [0,1]; empty if absent
    std::vector<Vec3> material_positions; // original embedding, used by flow tracking

    bool has_colors() const { return !colors.empty(); }
    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }

    Box3 bounding_box() const;
    double face_area(int f) const;
    Vec3 face_normal(int f) const; // unit normal, zero for degenerate faces
    /// Faces with zero area (area < 1e-14 * bbox_diag^2) are excluded from assembly.
    std::vector<char> degenerate_flags() const;
};

struct NormalizationTransform {
    double scale = 1.0; // > 0
    Vec3 translation{0, 0, 0};

    Vec3 apply(const Vec3& p) const { return p * scale + translation; }
    Vec3 invert(const Vec3& p) const { return (p - translation) / scale; }
};

/// Cotangent-weight stiffness and Galerkin linear-FEM mass of a triangle mesh.
/// L_cot is the positive semi-definite Dirichlet form (diagonal positive).
struct CotanOperator {
    Eigen::SparseMatrix<double, Eigen::RowMajor> L_cot;
    Eigen::SparseMatrix<double, Eigen::RowMajor> M_cot;
};

enum class MeshFormat { OBJ, PLY };

TriangleMesh load_mesh(const std::string& path);
TriangleMesh load_mesh(const std::string& path, MeshFormat format);
/// PLY output is ASCII; OBJ writes v/f records. Colors written when present.
void save_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format);
void save_mesh(const TriangleMesh& mesh, const std::string& path);

/// Scales and translates so the longest bounding-box side maps to (1 - 2*pad)
/// and the mesh is centered in the unit cube. material_positions are left in
/// the original embedding.
std::pair<TriangleMesh, NormalizationTransform> normalize(const TriangleMesh& mesh,
                                                          double pad = 0.05);

CotanOperator cotan_operator(const TriangleMesh& mesh);

/// Partition of faces by edge-connectivity (faces adjacent iff they share a
/// full mesh edge). Degenerate faces participate.
std::vector<std::vector<int>> connected_components(const TriangleMesh& mesh);

/// Per-vertex component id from edge-connected faces; isolated vertices get -1.
std::vector<int> vertex_component_ids(const TriangleMesh& mesh);

/// FNV-1a over vertex coordinates and face indices; keys the forest cache.
uint64_t mesh_hash(const TriangleMesh& mesh);

} // namespace gridfem
