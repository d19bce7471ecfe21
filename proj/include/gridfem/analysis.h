#pragma once

#include "gridfem/solver.h"

namespace gridfem {

/// Ascending smallest generalized eigenvalues of L x = lambda M x.
/// `converged` is false when the iteration budget ran out before all
/// requested pairs met the residual bound (partial report).
struct SpectrumReport {
    std::vector<double> eigenvalues;
    Mode mode = Mode::Unaware;
    int depth = -1; // -1 for the cotangent reference
    bool converged = true;
};

struct EigenPairs {
    std::vector<double> values; // ascending
    Eigen::MatrixXd vectors;    // one column per value
    bool converged = true;
};

/// Dense solve when dim <= 2000, otherwise shift-invert Lanczos in the
/// M-inner product with CG inner solves (full reorthogonalization). M is
/// shifted by 1e-12 * trace/dim when not positive definite.
EigenPairs smallest_generalized_eigenpairs(const SpMat& L, const SpMat& M, int m,
                                           double residual_tol = 1e-6);

SpectrumReport spectrum(const SparseSystem& system, int m);
SpectrumReport spectrum_cotan(const CotanOperator& op, int m);

/// Count of near-zero eigenvalues: |lambda| < rel_tol * lambda_max_listed.
int near_zero_count(const std::vector<double>& eigenvalues, double rel_tol = 1e-8);

/// RMS over 1-based indices [lo, hi] of |lambda_i - ref_i| / ref_i, skipping
/// indices where the reference is in its kernel (|ref_i| < 1e-8 * ref_hi).
double eigenvalue_deviation(const std::vector<double>& eigenvalues,
                            const std::vector<double>& reference, int lo = 2, int hi = 30);

struct ResolutionSweepRow {
    int depth = 0;
    int dim = 0;
    double deviation = 0.0;
    SpectrumReport report;
};
struct ResolutionSweepResult {
    std::vector<ResolutionSweepRow> rows;
    SpectrumReport reference; // cotangent ground truth on the same mesh
};
/// One spectrum per depth on a normalized mesh, plus the cotangent reference
/// and per-depth RMS deviation of the first m eigenvalues.
ResolutionSweepResult resolution_sweep(const TriangleMesh& normalized_mesh,
                                       const std::vector<int>& depths, Mode mode, int m);

struct RotationSweepResult {
    std::vector<SpectrumReport> reports; // one per rotation, world-scale eigenvalues
    std::vector<double> spread;          // per index: (max - min) / max(|mean|, tiny)
};
/// Applies each rotation to the world mesh, renormalizes, assembles at the
/// given depth and reports per-index eigenvalue spread. Eigenvalues are
/// mapped back to world scale so different normalizations are comparable.
RotationSweepResult rotation_sweep(const TriangleMesh& world_mesh,
                                   const std::vector<Eigen::Matrix3d>& rotations, int depth,
                                   Mode mode, int m, double pad = 0.05);

/// RMS error sqrt(sum_i |v_e - v_g|^2); note there is no 1/n inside the root.
double rms_error(const std::vector<Vec3>& evolved, const std::vector<Vec3>& ground_truth);
double rms_error(const TriangleMesh& evolved, const TriangleMesh& ground_truth);
/// Per-vertex-normalized variant sqrt(mean |v_e - v_g|^2).
double rms_error_normalized(const std::vector<Vec3>& evolved, const std::vector<Vec3>& ground_truth);

/// Standard deviation of vertex radii about the centroid divided by the mean
/// radius; 0 for a perfect sphere.
double sphericity(const std::vector<Vec3>& points);

} // namespace gridfem
