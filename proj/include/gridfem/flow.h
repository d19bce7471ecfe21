#pragma once

#include "gridfem/analysis.h"
#include "gridfem/solver.h"

#include <functional>

namespace gridfem {

enum class FlowSolver { Multigrid, CG };

struct FlowConfig {
    int depth = 5;
    int min_depth = 0;
    Mode mode = Mode::Aware;
    FlowSolver solver = FlowSolver::Multigrid;
    double delta = 0.1;          // stepsize; ignored in budget mode
    double budget_seconds = 0.0; // > 0 enables budget mode
    double total_time = 5.0;
    double epsilon = 0.0; // mass regularization for the initial projection
    CycleShape cycle = CycleShape::W;
    int smooth_iterations = 10;
    int max_cycles = 30;
    double solve_tol = 1e-10;
};

struct FlowState {
    int step = 0;
    double time = 0.0;
    double delta = 0.0;
    std::array<Vector, 3> coefficients;   // basis coefficients of x, y, z
    std::vector<Vec3> evolved_positions;  // coefficients evaluated at material vertex positions
};

/// Everything frozen across the flow: the normalized mesh, the fragment
/// forest, the hierarchy with the initial stiffness L_0 per level, and
/// per-vertex evaluation stencils at the finest level. Test functions never
/// move; only the surface measure in the mass integrals changes.
struct FlowContext {
    TriangleMesh mesh; // normalized
    NormalizationTransform transform;
    FragmentForest forest;
    MultigridHierarchy hierarchy;
    std::vector<double> original_face_area;
    std::vector<VertexStencil> stencils;

    std::vector<Vec3> evaluate_positions(const std::array<Vector, 3>& coefficients) const;
};

FlowContext build_flow_context(const TriangleMesh& world_mesh, const FlowConfig& config,
                               double pad = 0.05);

/// L2 projection of the coordinate functions: solve M u_c = s_c per
/// coordinate. Throws NumericalError if the projection CG fails to converge.
FlowState init_flow(const FlowContext& context, const FlowConfig& config, double delta);

/// One semi-implicit step (M_t + delta/2 L_0) u' = M_t u per coordinate,
/// with M_t tracked: material quadrature points, measures scaled by the
/// evolved/original area ratio of each face. Evolved triangles that
/// degenerate (ratio < 1e-12) contribute zero mass. After the solve the
/// surface is rescaled about its mass centroid back to the original total
/// area (the flow is scale-free; unchecked shrink would leave double range).
FlowState step_flow(const FlowContext& context, const FlowConfig& config, const FlowState& state);

struct FlowMetricsRow {
    int step = 0;
    double time = 0.0;
    double sphericity = 0.0;
    double rms = std::numeric_limits<double>::quiet_NaN(); // vs ground truth when supplied
    double solve_seconds = 0.0;
};

struct FlowResult {
    std::vector<FlowState> trajectory; // state 0 = initial projection
    std::vector<FlowMetricsRow> metrics;
    double delta_used = 0.0;
    int steps = 0;
};

/// Budget protocol: with a wall-clock budget B and measured per-step seconds
/// tau, take n = max(1, floor(B / tau)) steps of size delta = T / n.
std::pair<int, double> budget_steps(double budget_seconds, double measured_step_seconds,
                                    double total_time);

/// Runs the flow until total_time. ground_truth, when supplied, holds one
/// vertex-position set per step at matching times (entry 0 = initial).
FlowResult run_flow(const FlowContext& context, FlowConfig config,
                    const std::vector<std::vector<Vec3>>* ground_truth = nullptr);

/// Reference trajectory: cotangent cMCF on the same normalized mesh,
/// (M_t_cot + delta/2 L0_cot) x' = M_t_cot x solved by CG; entry 0 is the
/// input positions.
std::vector<std::vector<Vec3>> cotan_cmcf_trajectory(const TriangleMesh& normalized_mesh,
                                                     double delta, int steps);

} // namespace gridfem
