#include <doctest.h>

#include "gridfem/flow.h"
#include "gridfem/synthetic.h"

using namespace gridfem;

TEST_CASE("init_flow: projection of a flat square is exact (linear reproduction)") {
    // axis-aligned case: singular mass, consistent right-hand side
    for (double tilt : {0.0, 0.2}) {
        TriangleMesh square = make_axis_aligned_square(0.0);
        if (tilt > 0.0)
            square = rotated(square, Eigen::AngleAxisd(tilt, Vec3(1, 1, 0).normalized()).toRotationMatrix());
        FlowConfig config;
        config.depth = 3;
        config.min_depth = 2;
        const FlowContext context = build_flow_context(square, config);
        const FlowState state = init_flow(context, config, 0.5);
        CHECK(state.delta == 0.5);
        double max_err = 0.0;
        for (int v = 0; v < context.mesh.vertex_count(); ++v)
            max_err = std::max(max_err, (state.evolved_positions[static_cast<size_t>(v)] -
                                         context.mesh.vertices[static_cast<size_t>(v)]).norm());
        // the tilted variant is limited by the conditioning of its mass matrix
        CHECK(max_err <= (tilt == 0.0 ? 1e-10 : 1e-8));
    }
}

TEST_CASE("init_flow: coordinate functions are reproduced at every depth") {
    // x, y, z are restrictions of globally linear functions, so the L2
    // projection is exact up to solver tolerance regardless of resolution;
    // the 2%-of-diagonal budget holds with a huge margin.
    const TriangleMesh sphere = make_icosphere(3);
    for (int depth : {3, 4, 5}) {
        FlowConfig config;
        config.depth = depth;
        config.min_depth = depth;
        const FlowContext context = build_flow_context(sphere, config);
        const FlowState state = init_flow(context, config, 0.1);
        const double rms = rms_error_normalized(state.evolved_positions, context.mesh.vertices);
        CHECK(rms <= 1e-8);
        CHECK(rms <= 0.02 * std::sqrt(3.0) * 0.9); // bounding-box diagonal budget
    }
}

TEST_CASE("step_flow: delta = 0 leaves the state unchanged") {
    FlowConfig config;
    config.depth = 3;
    config.min_depth = 3;
    const FlowContext context = build_flow_context(make_icosphere(2), config);
    const FlowState s0 = init_flow(context, config, 0.0);
    const FlowState s1 = step_flow(context, config, s0);
    CHECK(s1.step == 1);
    for (int c = 0; c < 3; ++c)
        CHECK((s1.coefficients[static_cast<size_t>(c)] - s0.coefficients[static_cast<size_t>(c)]).norm() == 0.0);
}

TEST_CASE("step_flow: icosphere keeps its sphericity over ten steps") {
    // the flow's discrete fixed shape differs from the round sphere by the
    // grid discretization error, so this needs a fine-enough depth
    FlowConfig config;
    config.depth = 5;
    config.min_depth = 3;
    config.solver = FlowSolver::Multigrid;
    const FlowContext context = build_flow_context(make_icosphere(3), config);
    FlowState state = init_flow(context, config, 0.5);
    const double initial = sphericity(state.evolved_positions);
    for (int s = 0; s < 10; ++s) {
        state = step_flow(context, config, state);
        CHECK(sphericity(state.evolved_positions) <= initial + 1e-3);
    }
}

TEST_CASE("step_flow: Mt-weighted mean of the coefficients is preserved") {
    FlowConfig config;
    config.depth = 4;
    config.min_depth = 4;
    config.solver = FlowSolver::CG;
    config.solve_tol = 1e-12;
    const FlowContext context = build_flow_context(make_blob(2), config);
    FlowState state = init_flow(context, config, 0.4);
    const HierarchyLevel& finest = context.hierarchy.finest();

    std::vector<double> ratios(static_cast<size_t>(context.mesh.face_count()), 1.0);
    for (int f = 0; f < context.mesh.face_count(); ++f) {
        const auto& tri = context.mesh.faces[static_cast<size_t>(f)];
        const auto& p = state.evolved_positions;
        const double evolved = 0.5 * (p[static_cast<size_t>(tri[1])] - p[static_cast<size_t>(tri[0])])
                                         .cross(p[static_cast<size_t>(tri[2])] - p[static_cast<size_t>(tri[0])])
                                         .norm();
        ratios[static_cast<size_t>(f)] = evolved / context.mesh.face_area(f);
    }
    const SpMat Mt = assemble_mass_tracked(context.forest.level_at(config.depth), finest.table,
                                           finest.index, ratios);
    const Vector ones = Vector::Ones(finest.index.dim);
    const FlowState next = step_flow(context, config, state);
    for (int c = 0; c < 3; ++c) {
        const double before = ones.dot(Mt * state.coefficients[static_cast<size_t>(c)]) / ones.dot(Mt * ones);
        const double after = ones.dot(Mt * next.coefficients[static_cast<size_t>(c)]) / ones.dot(Mt * ones);
        CHECK(std::abs(after - before) <= 1e-6 * std::sqrt(3.0)); // bbox diagonal scale
    }
}

TEST_CASE("flow: aware and unaware trajectories coincide when the spaces do") {
    FlowConfig base;
    base.depth = 4;
    base.min_depth = 4;
    base.solver = FlowSolver::CG;
    base.solve_tol = 1e-12;
    base.delta = 0.3;
    base.total_time = 0.9;

    FlowConfig aware = base;
    aware.mode = Mode::Aware;
    FlowConfig unaware = base;
    unaware.mode = Mode::Unaware;

    const TriangleMesh world = make_icosphere(3);
    const FlowContext ca = build_flow_context(world, aware);
    const FlowContext cu = build_flow_context(world, unaware);
    REQUIRE(ca.hierarchy.finest().index.dim == cu.hierarchy.finest().index.dim);
    const FlowResult ra = run_flow(ca, aware);
    const FlowResult ru = run_flow(cu, unaware);
    REQUIRE(ra.trajectory.size() == ru.trajectory.size());
    for (size_t s = 0; s < ra.trajectory.size(); ++s) {
        const double err = rms_error(ra.trajectory[s].evolved_positions, ru.trajectory[s].evolved_positions);
        CHECK(err <= 1e-8);
    }
}

TEST_CASE("flow: blobby mesh gets rounder step by step") {
    FlowConfig config;
    config.depth = 4;
    config.min_depth = 2;
    const FlowContext context = build_flow_context(make_blob(3), config);
    FlowState state = init_flow(context, config, 1.0);
    double prev = sphericity(state.evolved_positions);
    int improving = 0;
    const int steps = 8;
    for (int s = 0; s < steps; ++s) {
        state = step_flow(context, config, state);
        const double now = sphericity(state.evolved_positions);
        if (now < prev) ++improving;
        prev = now;
    }
    CHECK(improving >= steps - 2);
    CHECK(state.coefficients[0].allFinite());
}

TEST_CASE("run_flow: T = 0 yields only the initial state; metrics rows line up") {
    FlowConfig config;
    config.depth = 3;
    config.min_depth = 3;
    config.total_time = 0.0;
    config.delta = 0.5;
    const FlowContext context = build_flow_context(make_icosphere(2), config);
    const FlowResult result = run_flow(context, config);
    CHECK(result.steps == 0);
    CHECK(result.trajectory.size() == 1);
    CHECK(result.metrics.size() == 1);
    CHECK(result.metrics[0].time == 0.0);
}

TEST_CASE("budget protocol: faster steps mean more, smaller steps") {
    const auto [fast_steps, fast_delta] = budget_steps(10.0, 0.1, 50.0);
    const auto [slow_steps, slow_delta] = budget_steps(10.0, 1.0, 50.0);
    CHECK(fast_steps == 100);
    CHECK(slow_steps == 10);
    CHECK(fast_steps > slow_steps);
    CHECK(fast_delta < slow_delta);
    CHECK(fast_steps * fast_delta == doctest::Approx(50.0));
    // budget smaller than one step still takes one step
    CHECK(budget_steps(0.5, 2.0, 50.0).first == 1);
}

TEST_CASE("flow: semi-implicit steps keep coefficient norms bounded") {
    FlowConfig config;
    config.depth = 3;
    config.min_depth = 3;
    config.solver = FlowSolver::CG;
    const FlowContext context = build_flow_context(make_blob(2), config);
    FlowState state = init_flow(context, config, 5.0);
    const double initial_norm = state.coefficients[0].norm() + state.coefficients[1].norm() +
                                state.coefficients[2].norm();
    for (int s = 0; s < 40; ++s) {
        state = step_flow(context, config, state);
        const double norm = state.coefficients[0].norm() + state.coefficients[1].norm() +
                            state.coefficients[2].norm();
        REQUIRE(std::isfinite(norm));
        CHECK(norm <= 10.0 * initial_norm);
    }
}
