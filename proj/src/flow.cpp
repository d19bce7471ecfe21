#include "gridfem/flow.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>

namespace gridfem {

namespace {

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * (b - a).cross(c - a).norm();
}

std::vector<double> evolved_area_ratios(const FlowContext& context,
                                        const std::vector<Vec3>& evolved) {
    const TriangleMesh& mesh = context.mesh;
    std::vector<double> ratio(static_cast<size_t>(mesh.face_count()), 1.0);
    static bool warned = false;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const auto& tri = mesh.faces[static_cast<size_t>(f)];
        const double orig = context.original_face_area[static_cast<size_t>(f)];
        if (orig <= 0.0) {
            ratio[static_cast<size_t>(f)] = 0.0;
            continue;
        }
        const double r = triangle_area(evolved[static_cast<size_t>(tri[0])], evolved[static_cast<size_t>(tri[1])],
                                       evolved[static_cast<size_t>(tri[2])]) /
                         orig;
        if (r < 1e-12) {
            if (!warned) {
                warn("flow: evolved triangle degenerated, mass contribution zeroed");
                warned = true;
            }
            ratio[static_cast<size_t>(f)] = 0.0;
        } else {
            ratio[static_cast<size_t>(f)] = r;
        }
    }
    return ratio;
}

} // namespace

std::vector<Vec3> FlowContext::evaluate_positions(const std::array<Vector, 3>& coefficients) const {
    std::vector<Vec3> out(stencils.size());
    for (size_t v = 0; v < stencils.size(); ++v)
        for (int c = 0; c < 3; ++c) out[v][c] = stencils[v].evaluate(coefficients[static_cast<size_t>(c)]);
    return out;
}

FlowContext build_flow_context(const TriangleMesh& world_mesh, const FlowConfig& config,
                               double pad) {
    FlowContext context;
    auto [mesh_n, transform] = normalize(world_mesh, pad);
    context.mesh = std::move(mesh_n);
    context.transform = transform;
    context.forest = build_fragment_forest(context.mesh, config.depth, config.min_depth);
    context.hierarchy = build_hierarchy(context.mesh, context.forest, config.min_depth,
                                        config.depth, config.mode, 0.0);
    context.original_face_area.resize(static_cast<size_t>(context.mesh.face_count()));
    for (int f = 0; f < context.mesh.face_count(); ++f)
        context.original_face_area[static_cast<size_t>(f)] = context.mesh.face_area(f);

    const HierarchyLevel& finest = context.hierarchy.finest();
    context.stencils = build_vertex_stencils(context.mesh, context.forest.level_at(config.depth),
                                             finest.table, finest.index);
    return context;
}

FlowState init_flow(const FlowContext& context, const FlowConfig& config, double delta) {
    const HierarchyLevel& finest = context.hierarchy.finest();
    const FragmentLevel& level = context.forest.level_at(config.depth);

    std::vector<Vector> coords(3, Vector(context.mesh.vertex_count()));
    for (int v = 0; v < context.mesh.vertex_count(); ++v)
        for (int c = 0; c < 3; ++c) coords[static_cast<size_t>(c)][v] = context.mesh.vertices[static_cast<size_t>(v)][c];
    const std::vector<LoadVectors> loads = load_vectors(context.mesh, level, finest.table, finest.index, coords);

    SpMat M = finest.system.M;
    if (config.epsilon > 0.0) {
        SpMat id(M.rows(), M.cols());
        id.setIdentity();
        M = M + config.epsilon * id;
    }

    FlowState state;
    state.delta = delta;
    for (int c = 0; c < 3; ++c) {
        state.coefficients[static_cast<size_t>(c)] = Vector::Zero(finest.index.dim);
        CgResult r = cg_solve(M, loads[static_cast<size_t>(c)].s, state.coefficients[static_cast<size_t>(c)], 1e-13,
                              10 * finest.index.dim + 100);
        if (!r.converged && r.rel_residual > 1e-8) {
            // exactly singular mass (axis-aligned planar geometry): retry with
            // a tiny shift; the consistent right-hand side keeps surface
            // values unchanged
            SpMat id(M.rows(), M.cols());
            id.setIdentity();
            const SpMat Mreg = M + (1e-12 * M.diagonal().maxCoeff()) * id;
            state.coefficients[static_cast<size_t>(c)].setZero();
            r = cg_solve(Mreg, loads[static_cast<size_t>(c)].s, state.coefficients[static_cast<size_t>(c)], 1e-13,
                         10 * finest.index.dim + 100);
            if (!r.converged && r.rel_residual > 1e-8) {
                char msg[96];
                std::snprintf(msg, sizeof(msg), "init_flow: projection CG did not converge (residual %.3g)",
                              r.rel_residual);
                throw NumericalError(msg);
            }
        }
    }
    state.evolved_positions = context.evaluate_positions(state.coefficients);
    return state;
}

FlowState step_flow(const FlowContext& context, const FlowConfig& config, const FlowState& state) {
    FlowState next;
    next.step = state.step + 1;
    next.delta = state.delta;
    next.time = state.time + state.delta;
    if (state.delta == 0.0) {
        next.coefficients = state.coefficients;
        next.evolved_positions = state.evolved_positions;
        return next;
    }

    const std::vector<double> ratios = evolved_area_ratios(context, state.evolved_positions);
    const MultigridHierarchy& h = context.hierarchy;

    // Tracked mass and the semi-implicit operator per level. Basis functions
    // whose support is a sliver leave near-zero rows in both M_t and L_0;
    // a relative diagonal shift pins their coefficients instead of letting
    // solver noise accumulate there.
    std::vector<SpMat> masses;
    std::vector<SpMat> ops;
    masses.reserve(h.levels.size());
    ops.reserve(h.levels.size());
    for (const HierarchyLevel& lvl : h.levels) {
        SpMat Mt = assemble_mass_tracked(context.forest.level_at(lvl.depth), lvl.table, lvl.index, ratios);
        SpMat A = Mt + (state.delta / 2.0) * lvl.system.L;
        const double reg = 1e-12 * A.diagonal().maxCoeff();
        if (reg > 0.0) {
            SpMat id(A.rows(), A.cols());
            id.setIdentity();
            A = A + reg * id;
        }
        ops.push_back(std::move(A));
        masses.push_back(std::move(Mt));
    }

    const SpMat& Mt_fine = masses.back();
    for (int c = 0; c < 3; ++c) {
        const Vector rhs = Mt_fine * state.coefficients[static_cast<size_t>(c)];
        Vector u = state.coefficients[static_cast<size_t>(c)]; // warm start
        double rel = 1.0;
        if (config.solver == FlowSolver::Multigrid && h.level_count() > 1) {
            MultigridSolver mg(ops, h, CycleConfig{config.cycle, config.smooth_iterations, 500, 2000});
            rel = mg.solve(u, rhs, config.solve_tol, config.max_cycles);
        }
        if (rel > 1e-6 || config.solver == FlowSolver::CG || h.level_count() == 1) {
            // CG backstop; multigrid can struggle when evolved masses leave
            // the hierarchy far from the current operator
            if (config.solver == FlowSolver::Multigrid && rel > 1e-6 && h.level_count() > 1)
                u = state.coefficients[static_cast<size_t>(c)];
            cg_solve(ops.back(), rhs, u, config.solve_tol, 10 * static_cast<int>(rhs.size()) + 100);
        }
        if (!u.allFinite()) throw NumericalError("step_flow: non-finite coefficients");
        next.coefficients[static_cast<size_t>(c)] = std::move(u);
    }
    next.evolved_positions = context.evaluate_positions(next.coefficients);

    // The flow is scale-free; rescale about the mass centroid so the evolved
    // area matches the original. Without this the tracked masses shrink
    // super-exponentially and the coefficients vanish below double precision.
    double evolved_area = 0.0, original_area = 0.0;
    for (int f = 0; f < context.mesh.face_count(); ++f) {
        const auto& tri = context.mesh.faces[static_cast<size_t>(f)];
        const auto& p = next.evolved_positions;
        evolved_area += triangle_area(p[static_cast<size_t>(tri[0])], p[static_cast<size_t>(tri[1])], p[static_cast<size_t>(tri[2])]);
        original_area += context.original_face_area[static_cast<size_t>(f)];
    }
    if (evolved_area > 1e-300) {
        const double gamma = std::sqrt(original_area / evolved_area);
        const Vector ones = Vector::Ones(Mt_fine.rows());
        const double mass = ones.dot(Mt_fine * ones);
        for (int c = 0; c < 3; ++c) {
            Vector& u = next.coefficients[static_cast<size_t>(c)];
            const double center = ones.dot(Mt_fine * u) / mass;
            u = Vector::Constant(u.size(), center) + gamma * (u - Vector::Constant(u.size(), center));
        }
        next.evolved_positions = context.evaluate_positions(next.coefficients);
    }
    return next;
}

std::pair<int, double> budget_steps(double budget_seconds, double measured_step_seconds,
                                    double total_time) {
    const double tau = std::max(measured_step_seconds, 1e-9);
    const int n = std::max(1, static_cast<int>(std::floor(budget_seconds / tau)));
    return {n, total_time / n};
}

FlowResult run_flow(const FlowContext& context, FlowConfig config,
                    const std::vector<std::vector<Vec3>>* ground_truth) {
    FlowResult result;
    int steps = 0;
    double delta = config.delta;
    if (config.budget_seconds > 0.0) {
        // Probe one step to estimate the per-step cost, then fix the step
        // count so the whole flow fits in the budget.
        FlowState probe = init_flow(context, config, std::max(config.total_time / 16.0, 1e-6));
        const auto t0 = std::chrono::steady_clock::now();
        (void)step_flow(context, config, probe);
        const double tau = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::tie(steps, delta) = budget_steps(config.budget_seconds, tau, config.total_time);
    } else {
        if (delta <= 0.0) throw IoError("run_flow: need delta > 0 or a budget");
        steps = static_cast<int>(std::llround(config.total_time / delta));
        if (config.total_time <= 0.0) steps = 0;
    }
    result.delta_used = delta;
    result.steps = steps;

    FlowState state = init_flow(context, config, delta);
    auto record = [&](const FlowState& s, double solve_seconds) {
        FlowMetricsRow row;
        row.step = s.step;
        row.time = s.time;
        row.sphericity = sphericity(s.evolved_positions);
        if (ground_truth && static_cast<size_t>(s.step) < ground_truth->size())
            row.rms = rms_error(s.evolved_positions, (*ground_truth)[static_cast<size_t>(s.step)]);
        row.solve_seconds = solve_seconds;
        result.metrics.push_back(row);
    };
    result.trajectory.push_back(state);
    record(state, 0.0);
    for (int s = 0; s < steps; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        state = step_flow(context, config, state);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.trajectory.push_back(state);
        record(state, secs);
    }
    return result;
}

std::vector<std::vector<Vec3>> cotan_cmcf_trajectory(const TriangleMesh& normalized_mesh,
                                                     double delta, int steps) {
    std::vector<std::vector<Vec3>> trajectory;
    trajectory.push_back(normalized_mesh.vertices);
    const CotanOperator base = cotan_operator(normalized_mesh);
    TriangleMesh evolved = normalized_mesh;
    const int n = normalized_mesh.vertex_count();
    double original_area = 0.0;
    for (int f = 0; f < normalized_mesh.face_count(); ++f) original_area += normalized_mesh.face_area(f);
    for (int s = 0; s < steps; ++s) {
        const SpMat Mt = cotan_operator(evolved).M_cot;
        const SpMat A = Mt + (delta / 2.0) * base.L_cot;
        for (int c = 0; c < 3; ++c) {
            Vector x(n);
            for (int v = 0; v < n; ++v) x[v] = evolved.vertices[static_cast<size_t>(v)][c];
            const Vector rhs = Mt * x;
            const CgResult r = cg_solve(A, rhs, x, 1e-12, 20 * n + 200);
            if (!r.converged && r.rel_residual > 1e-6)
                throw NumericalError("cotan_cmcf_trajectory: CG did not converge");
            for (int v = 0; v < n; ++v) evolved.vertices[static_cast<size_t>(v)][c] = x[v];
        }
        // same area renormalization about the mass centroid as the grid flow
        double evolved_area = 0.0;
        for (int f = 0; f < evolved.face_count(); ++f) evolved_area += evolved.face_area(f);
        if (evolved_area > 1e-300) {
            const double gamma = std::sqrt(original_area / evolved_area);
            const Vector ones = Vector::Ones(n);
            const Vector weights = Mt * ones;
            Vec3 center = Vec3::Zero();
            for (int v = 0; v < n; ++v) center += weights[v] * evolved.vertices[static_cast<size_t>(v)];
            center /= weights.sum();
            for (int v = 0; v < n; ++v)
                evolved.vertices[static_cast<size_t>(v)] = center + gamma * (evolved.vertices[static_cast<size_t>(v)] - center);
        }
        trajectory.push_back(evolved.vertices);
    }
    return trajectory;
}

} // namespace gridfem
