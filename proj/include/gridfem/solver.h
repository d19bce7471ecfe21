#pragma once

#include "gridfem/assembly.h"

#include <Eigen/Cholesky>
#include <memory>
#include <optional>

namespace gridfem {

/// Sparse prolongation P (fine_dim x coarse_dim) between consecutive levels.
/// Unaware mode: the tensor product of the 1D two-scale mask. Aware mode:
/// the same weights gated by the containment indicator chi, so a coarse
/// component prolongs only into the fine components it contains.
struct ProlongationMatrix {
    SpMat P;
    Mode mode = Mode::Unaware;
    int coarse_depth = 0;
    int fine_depth = 0;
};

ProlongationMatrix build_prolongation(const ComponentTable& coarse_table,
                                      const BasisIndex& coarse_index,
                                      const ComponentTable& fine_table,
                                      const BasisIndex& fine_index,
                                      const FragmentLevel& fine_level,
                                      ProlongationMask mask = ProlongationMask::Linear);

/// Max pointwise error of the prolongation identity
///   b_k^i(p) = sum_(k',i') P((k',i'),(k,i)) * b_(k')^(i')(p)
/// over `points_per_basis` samples on each coarse basis function's component
/// (area-weighted over its fine fragments). This is the executable form of
/// the space-nesting claim.
struct NestingCheck {
    double max_error = 0.0;
    long points = 0;
};
NestingCheck check_prolongation_exactness(const TriangleMesh& mesh, const FragmentLevel& coarse_level,
                                          const ComponentTable& coarse_table, const BasisIndex& coarse_index,
                                          const FragmentLevel& fine_level, const ComponentTable& fine_table,
                                          const BasisIndex& fine_index, const SpMat& P,
                                          int points_per_basis, uint64_t seed);

/// nu forward sweeps in index order. Rows with zero diagonal are skipped
/// with a warning (possible for epsilon = 0 pathological rows).
void gauss_seidel(const SpMat& A, Vector& u, const Vector& rhs, int sweeps);

struct CgResult {
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};
/// Plain conjugate gradients on a symmetric PSD operator. Throws
/// NumericalError on NaN.
CgResult cg_solve(const SpMat& A, const Vector& rhs, Vector& u, double tol = 1e-10,
                  int max_iter = 10000);

/// Direct solve when dim <= 2000 (LDLT with a rank check, flagging singular
/// systems), CG otherwise. Stands in for a production direct solver at desk
/// scale.
struct ReferenceSolveResult {
    Vector u;
    bool singular = false;
    bool converged = false;
};
ReferenceSolveResult reference_solve(const SpMat& A, const Vector& rhs, double tol = 1e-10,
                                     int max_iter = 10000);

/// Per-level component tables, bases, systems and prolongations spanning
/// [min_depth, max_depth]. Each level's system is assembled from its own
/// basis; set galerkin to replace coarse matrices by P^T A P instead.
struct HierarchyLevel {
    int depth = 0;
    ComponentTable table;
    BasisIndex index;
    SparseSystem system;
    SpMat P; // from the previous (coarser) level to this one; empty on the coarsest
};

struct MultigridHierarchy {
    Mode mode = Mode::Unaware;
    int min_depth = 0;
    int max_depth = 0;
    std::vector<HierarchyLevel> levels; // [0] = coarsest

    HierarchyLevel& finest() { return levels.back(); }
    const HierarchyLevel& finest() const { return levels.back(); }
    int level_count() const { return static_cast<int>(levels.size()); }
};

MultigridHierarchy build_hierarchy(const TriangleMesh& mesh, const FragmentForest& forest,
                                   int min_depth, int max_depth, Mode mode, double epsilon = 0.0,
                                   bool galerkin = false,
                                   ProlongationMask mask = ProlongationMask::Linear);

enum class CycleShape { V, W };

struct CycleConfig {
    CycleShape shape = CycleShape::W;
    int smooth_iterations = 10; // nu, applied both before and after coarse correction
    int coarse_sweeps = 500;    // exhaustive Gauss-Seidel at the coarsest level
    int coarse_direct_dim = 2000;
};

struct CycleStats {
    std::vector<double> pre_residual;  // per level, finest last
    std::vector<double> post_residual;
};

/// Multigrid on per-level operators sharing the hierarchy's prolongations.
/// A single-level solver degenerates to 2*nu Gauss-Seidel sweeps.
class MultigridSolver {
  public:
    MultigridSolver(std::vector<SpMat> per_level_operators, const MultigridHierarchy& hierarchy,
                    CycleConfig config);
    /// Explicit prolongation list (prolongations[l] maps level l-1 to l,
    /// entry 0 unused); enables solving over a sub-range of a hierarchy.
    /// The pointed-to matrices must outlive the solver.
    MultigridSolver(std::vector<SpMat> per_level_operators,
                    std::vector<const SpMat*> prolongations, CycleConfig config);

    CycleStats cycle(Vector& u, const Vector& rhs) const;
    /// Runs cycles until the relative residual drops below tol or max_cycles
    /// is reached; returns the final relative residual.
    double solve(Vector& u, const Vector& rhs, double tol, int max_cycles) const;

    const SpMat& op(int level) const { return A_[static_cast<size_t>(level)]; }
    int level_count() const { return static_cast<int>(A_.size()); }

  private:
    void recurse(int level, Vector& u, const Vector& rhs, CycleStats& stats) const;
    void coarse_solve(Vector& u, const Vector& rhs) const;

    std::vector<SpMat> A_;
    std::vector<const SpMat*> P_; // P_[l] maps level l-1 to level l; unused at l=0
    CycleConfig config_;
    mutable std::optional<Eigen::LDLT<Eigen::MatrixXd>> coarse_factor_;
    mutable bool coarse_factor_usable_ = false;
    mutable bool coarse_factor_tried_ = false;
};

/// Screened-Poisson operators (L + alpha*M per level) for a hierarchy.
std::vector<SpMat> screened_operators(const MultigridHierarchy& hierarchy, double alpha);

} // namespace gridfem
