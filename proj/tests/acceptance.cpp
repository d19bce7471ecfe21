// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria 3 and 9 drive the CLI binary end to end.

#include "gridfem/flow.h"
#include "gridfem/synthetic.h"
#include "oracles.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace gridfem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct LevelBundle {
    FragmentForest forest;
    ComponentTable table;
    BasisIndex index;
    SparseSystem system;
};

LevelBundle bundle(const TriangleMesh& mesh, int depth, Mode mode, double epsilon = 0.0) {
    LevelBundle b{build_fragment_forest(mesh, depth, depth), {}, {}, {}};
    b.table = corner_components(b.forest.level_at(depth), mesh);
    b.index = enumerate_basis(b.table, mode);
    b.system = assemble(mesh, b.forest.level_at(depth), b.table, b.index, epsilon);
    return b;
}

std::filesystem::path work_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "gridfem_acceptance";
    std::filesystem::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GRIDFEM_CLI_PATH) + " " + args + " > /dev/null";
    return std::system(cmd.c_str());
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------

void criterion_1_nesting() {
    const auto started = std::chrono::steady_clock::now();
    double worst = 0.0;
    long points = 0;
    const std::vector<std::pair<std::string, TriangleMesh>> corpus = {
        {"sphere", make_icosphere(3)},
        {"cube-lattice", make_cube_lattice(2)},
        {"two-sheet", make_two_sheets(8, 0.01)},
    };
    for (const auto& [name, world] : corpus) {
        const auto [mesh, t] = normalize(world, 0.05);
        const FragmentForest forest = build_fragment_forest(mesh, 5, 0);
        for (int coarse_depth : {3, 4}) {
            const MultigridHierarchy h = build_hierarchy(mesh, forest, coarse_depth, coarse_depth + 1, Mode::Aware);
            const NestingCheck check = check_prolongation_exactness(
                mesh, forest.level_at(coarse_depth), h.levels[0].table, h.levels[0].index,
                forest.level_at(coarse_depth + 1), h.levels[1].table, h.levels[1].index,
                h.levels[1].P, 1000, 424242);
            worst = std::max(worst, check.max_error);
            points += check.points;
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report(1, "prolongation exactness (nesting)", worst <= 1e-10 && points > 0,
           "max_error=" + fmt(worst) + " points=" + std::to_string(points) + " time=" + fmt(seconds) + "s");
}

void criterion_2_kernel_counting() {
    bool pass = true;
    std::string detail;
    const std::vector<std::tuple<std::string, TriangleMesh, int, int>> cases = {
        {"sphere", make_icosphere(3), 1, 4},
        {"two-sheet", make_two_sheets(8, 0.01), 2, 3},
        {"cube-lattice", make_cube_lattice(2), 8, 2},
    };
    for (const auto& [name, world, k, depth] : cases) {
        const auto [mesh, t] = normalize(world, 0.05);
        const std::vector<int> face_comp = [&] {
            std::vector<int> out(static_cast<size_t>(mesh.face_count()), -1);
            const auto comps = connected_components(mesh);
            for (size_t c = 0; c < comps.size(); ++c)
                for (int f : comps[c]) out[static_cast<size_t>(f)] = static_cast<int>(c);
            return out;
        }();
        const int ncomp = *std::max_element(face_comp.begin(), face_comp.end()) + 1;
        if (ncomp != k) {
            pass = false;
            detail += name + ": component count " + std::to_string(ncomp) + " != " + std::to_string(k) + "; ";
            continue;
        }

        // aware: every component indicator is in the kernel
        const LevelBundle aware = bundle(mesh, depth, Mode::Aware);
        const FragmentLevel& level = aware.forest.level_at(depth);
        const double scale = aware.system.L.coeffs().abs().maxCoeff();
        std::vector<Vector> indicators;
        for (int c = 0; c < k; ++c) {
            Vector ind = Vector::Zero(aware.index.dim);
            for (int32_t id = 0; id < aware.index.dim; ++id) {
                const auto frags = basis_fragments(level, aware.table, aware.index, id);
                if (!frags.empty() && face_comp[static_cast<size_t>(level.frags[frags[0]].face)] == c) ind[id] = 1.0;
            }
            indicators.push_back(ind);
            const double err = (aware.system.L * ind).lpNorm<Eigen::Infinity>();
            if (err > 1e-9 * scale) {
                pass = false;
                detail += name + ": aware |L 1_c|=" + fmt(err) + " vs " + fmt(1e-9 * scale) + "; ";
            }
        }

        // unaware at a coupling depth: the span of the component indicators
        // holds strictly fewer than k independent near-null directions (the
        // individual indicators all approach the global constant when the
        // coupling is total, so the rank of L restricted to the span is the
        // meaningful count)
        if (k >= 2) {
            const LevelBundle unaware = bundle(mesh, depth, Mode::Unaware);
            const FragmentLevel& ulevel = unaware.forest.level_at(depth);
            double lambda_max_lb = 0.0;
            for (int i = 0; i < unaware.index.dim; ++i) {
                const double mii = unaware.system.M.coeff(i, i);
                if (mii > 0.0) lambda_max_lb = std::max(lambda_max_lb, unaware.system.L.coeff(i, i) / mii);
            }
            std::vector<Vector> indicators;
            for (int c = 0; c < k; ++c) {
                // corner indicator: 1 on corners whose support touches component c
                Vector ind = Vector::Zero(unaware.index.dim);
                for (int32_t id = 0; id < unaware.index.dim; ++id) {
                    const auto frags = basis_fragments(ulevel, unaware.table, unaware.index, id);
                    for (uint32_t f : frags)
                        if (face_comp[static_cast<size_t>(ulevel.frags[f].face)] == c) {
                            ind[id] = 1.0;
                            break;
                        }
                }
                indicators.push_back(std::move(ind));
            }
            Eigen::MatrixXd gl(k, k), gm(k, k);
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) {
                    gl(a, b) = indicators[static_cast<size_t>(a)].dot(unaware.system.L * indicators[static_cast<size_t>(b)]);
                    gm(a, b) = indicators[static_cast<size_t>(a)].dot(unaware.system.M * indicators[static_cast<size_t>(b)]);
                }
            const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> restricted(gl, gm);
            int near_null = 0;
            for (int i = 0; i < k; ++i)
                if (restricted.eigenvalues()[i] < 1e-6 * lambda_max_lb) ++near_null;
            if (near_null >= k) {
                pass = false;
                detail += name + ": unaware kept " + std::to_string(near_null) + " near-null span directions; ";
            }
        }
    }
    report(2, "kernel counting (k = 1, 2, 8)", pass, detail.empty() ? "all indicators behaved" : detail);
}

void criterion_3_and_9_residual_sweep() {
    const auto started = std::chrono::steady_clock::now();
    const auto dir = work_dir();
    // 3x3x3 cubes with gap 4x the cube size: at depth 5 each cube spans the
    // same ~2.6 voxels as the 6x6x6 equidistant scene does, so pure
    // smoothing already saturates the unaware residual at every min depth
    const auto mesh_path = dir / "lattice3.ply";
    save_mesh(make_cube_lattice(3, 4.0), mesh_path.string(), MeshFormat::PLY);

    const int depth = 5;
    const std::string common = "convergence --mesh " + mesh_path.string() + " --depth " +
                               std::to_string(depth) +
                               " --alpha 0.01 --smooth 10 --cycle w --cycles 1 --seed 7 "
                               "--synthetic-texture checkerboard3d:5.0 --out ";
    const auto out_a = dir / "conv_a";
    const auto out_b = dir / "conv_b";
    const int rc_a = run_cli(common + out_a.string());
    const int rc_b = run_cli(common + out_b.string());

    bool pass = rc_a == 0 && rc_b == 0;
    std::string detail;
    std::vector<double> unaware, aware;
    if (pass) {
        std::ifstream csv(out_a / "convergence.csv");
        std::string line;
        while (std::getline(csv, line)) {
            if (line.empty() || line[0] == '#' || line[0] == 'm') continue;
            std::stringstream ss(line);
            std::string cell;
            std::getline(ss, cell, ',');
            std::getline(ss, cell, ',');
            unaware.push_back(std::stod(cell));
            std::getline(ss, cell, ',');
            aware.push_back(std::stod(cell));
        }
        pass = unaware.size() == static_cast<size_t>(depth) + 1;
    }
    if (pass) {
        const double u_max = *std::max_element(unaware.begin(), unaware.end());
        const double u_min = *std::min_element(unaware.begin(), unaware.end());
        const double aware_growth = aware.back() / aware.front();
        const bool flat_unaware = u_max / u_min <= 2.0;
        const bool growing_aware = aware_growth >= 5.0;
        pass = flat_unaware && growing_aware;
        detail = "unaware max/min=" + fmt(u_max / u_min) + " aware growth=" + fmt(aware_growth);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report(3, "residual vs minimum depth (cube lattice analog)", pass, detail + " time=" + fmt(seconds) + "s");

    const bool identical = slurp(out_a / "convergence.csv") == slurp(out_b / "convergence.csv") &&
                           !slurp(out_a / "convergence.csv").empty();
    // flow determinism: same seed and delta twice
    const auto hemi_path = dir / "hemi.ply";
    save_mesh(make_two_hemispheres(12, 18, 1.0, 0.02), hemi_path.string(), MeshFormat::PLY);
    const std::string flow_common = "flow --mesh " + hemi_path.string() +
                                    " --depth 4 --min-depth 2 --delta 0.5 --total-time 2 "
                                    "--solver mg --ply-stride 0 --seed 3 --out ";
    const auto flow_a = dir / "flow_a";
    const auto flow_b = dir / "flow_b";
    const bool flow_ok = run_cli(flow_common + flow_a.string()) == 0 &&
                         run_cli(flow_common + flow_b.string()) == 0;
    const bool flow_identical = flow_ok &&
                                slurp(flow_a / "flow_metrics.csv") == slurp(flow_b / "flow_metrics.csv") &&
                                !slurp(flow_a / "flow_metrics.csv").empty();
    report(9, "determinism: repeated runs give byte-identical CSVs", identical && flow_identical,
           std::string("convergence=") + (identical ? "identical" : "DIFFERS") +
               " flow=" + (flow_identical ? "identical" : "DIFFERS"));
}

void criterion_4_quadrature_oracle() {
    const auto [mesh, t] = normalize(make_icosphere(2), 0.05);
    const LevelBundle b = bundle(mesh, 4, Mode::Aware);
    const FragmentLevel& level = b.forest.level_at(4);

    std::mt19937_64 rng(20240815);
    std::uniform_int_distribution<int> pick(0, b.index.dim - 1);
    int passed = 0, total = 0;
    while (total < 200) {
        const int32_t i = pick(rng), j = pick(rng);
        if (b.system.M.coeff(i, j) == 0.0 && i != j) continue;
        const PairKind kind = total % 2 == 0 ? PairKind::Stiffness : PairKind::Mass;
        const double exact = integrate_pair(mesh, level, b.table, b.index, i, j, kind);
        const auto est = oracles::mc_integrate_pair(mesh, level, b.table, b.index, i, j, kind,
                                                    100000, 555000 + static_cast<uint64_t>(total));
        if (std::abs(exact - est.mean) <= 3.0 * est.standard_error + 1e-14) ++passed;
        ++total;
    }
    report(4, "quadrature vs Monte-Carlo oracle (200 entries, 1e5 samples)",
           passed >= 190, std::to_string(passed) + "/200 within 3 standard errors");
}

void criterion_5_spectral_convergence() {
    const auto started = std::chrono::steady_clock::now();
    // fine sheets keep the cotangent reference's own discretization error
    // well below the finest grid deviation, so the trend is visible
    const auto [mesh, t] = normalize(make_two_sheets(128, 0.01), 0.05);
    const std::vector<int> depths = {3, 4, 5, 6};
    const int m = 30;
    const ResolutionSweepResult aware = resolution_sweep(mesh, depths, Mode::Aware, m);
    const ResolutionSweepResult unaware = resolution_sweep(mesh, depths, Mode::Unaware, m);

    bool non_increasing = true;
    for (size_t d = 1; d < aware.rows.size(); ++d)
        if (aware.rows[d].deviation > aware.rows[d - 1].deviation * 1.05) non_increasing = false;
    bool aware_below = true;
    std::string detail;
    for (size_t d = 0; d < aware.rows.size(); ++d) {
        if (aware.rows[d].deviation > unaware.rows[d].deviation) aware_below = false;
        detail += "d" + std::to_string(aware.rows[d].depth) + ":" + fmt(aware.rows[d].deviation) +
                  "/" + fmt(unaware.rows[d].deviation) + " ";
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report(5, "spectral convergence trend (aware vs unaware)", non_increasing && aware_below,
           detail + "time=" + fmt(seconds) + "s");
}

void criterion_6_rotation_stability() {
    const TriangleMesh world = make_two_sheets(16, 0.01);
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss;
    std::vector<Eigen::Matrix3d> rotations;
    for (int r = 0; r < 5; ++r) {
        Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        q.normalize();
        rotations.push_back(q.toRotationMatrix());
    }
    const int m = 30;
    const RotationSweepResult aware = rotation_sweep(world, rotations, 4, Mode::Aware, m);
    const RotationSweepResult unaware = rotation_sweep(world, rotations, 4, Mode::Unaware, m);
    int aware_wins = 0, total = 0;
    for (int i = 2; i <= m; ++i) {
        if (static_cast<size_t>(i) > aware.spread.size() || static_cast<size_t>(i) > unaware.spread.size()) break;
        ++total;
        if (aware.spread[static_cast<size_t>(i) - 1] <= unaware.spread[static_cast<size_t>(i) - 1]) ++aware_wins;
    }
    report(6, "rotation stability (per-index spread, indices 2-30)",
           total > 0 && aware_wins * 100 >= total * 80,
           std::to_string(aware_wins) + "/" + std::to_string(total) + " indices favor aware");
}

void criterion_7_cmcf() {
    const auto started = std::chrono::steady_clock::now();
    bool pass = true;
    std::string detail;

    { // icosphere keeps its sphericity
        FlowConfig config;
        config.depth = 5;
        config.min_depth = 3;
        const FlowContext context = build_flow_context(make_icosphere(4), config);
        FlowState state = init_flow(context, config, 0.5);
        const double initial = sphericity(state.evolved_positions);
        double worst = initial;
        for (int s = 0; s < 10; ++s) {
            state = step_flow(context, config, state);
            worst = std::max(worst, sphericity(state.evolved_positions));
        }
        if (worst > initial + 1e-3) pass = false;
        detail += "sphere drift=" + fmt(worst - initial) + "; ";
    }
    { // blobby genus-0 mesh reaches sphericity <= 0.05 within 30 steps at delta = 1
        FlowConfig config;
        config.depth = 5;
        config.min_depth = 3;
        const FlowContext context = build_flow_context(make_blob(4, 0.3), config);
        FlowState state = init_flow(context, config, 1.0);
        double best = sphericity(state.evolved_positions);
        for (int s = 0; s < 30 && best > 0.05; ++s) {
            state = step_flow(context, config, state);
            best = std::min(best, sphericity(state.evolved_positions));
        }
        if (best > 0.05) pass = false;
        detail += "blob sphericity=" + fmt(best) + "; ";
    }
    { // aware beats unaware against the cotangent ground truth on near-touching
      // hemispheres; the open caps tolerate only a short mild flow before the
      // reference itself collapses, so the comparison uses a few small steps
        const TriangleMesh world = make_two_hemispheres(16, 24, 1.0, 0.02);
        const double delta = 0.2;
        const int steps = 5;
        double rms_aware = 0.0, rms_unaware = 0.0;
        std::vector<std::vector<Vec3>> ground_truth;
        for (Mode mode : {Mode::Aware, Mode::Unaware}) {
            FlowConfig config;
            config.depth = 5;
            config.min_depth = 3;
            config.mode = mode;
            config.solver = FlowSolver::CG;
            config.delta = delta;
            config.total_time = delta * steps;
            const FlowContext context = build_flow_context(world, config);
            if (ground_truth.empty())
                ground_truth = cotan_cmcf_trajectory(context.mesh, delta, steps);
            const FlowResult result = run_flow(context, config, &ground_truth);
            const double rms = result.metrics.back().rms;
            (mode == Mode::Aware ? rms_aware : rms_unaware) = rms;
        }
        if (!(rms_aware < rms_unaware)) pass = false;
        detail += "hemisphere rms aware=" + fmt(rms_aware) + " unaware=" + fmt(rms_unaware);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report(7, "conformalized mean-curvature flow sanity", pass, detail + " time=" + fmt(seconds) + "s");
}

void criterion_8_singular_case() {
    const auto [mesh, t] = normalize(make_axis_aligned_square(0.0), 0.05);
    const LevelBundle plain = bundle(mesh, 3, Mode::Aware, 0.0);
    const Vector rhs = Vector::Ones(plain.index.dim);
    const ReferenceSolveResult bad = reference_solve(screened_operator(plain.system, 0.01), rhs);

    const LevelBundle fixed = bundle(mesh, 3, Mode::Aware, 1e-8);
    const SpMat A = screened_operator(fixed.system, 0.01);
    const ReferenceSolveResult good = reference_solve(A, rhs);
    const bool solved = !good.singular && good.converged && (A * good.u - rhs).norm() / rhs.norm() <= 1e-8;
    report(8, "axis-aligned plane: singular at eps 0, solvable at eps 1e-8", bad.singular && solved,
           std::string("eps0=") + (bad.singular ? "singular" : "NOT singular") +
               " eps1e-8=" + (solved ? "solved" : "failed"));
}

} // namespace

int main() {
    std::printf("gridfem acceptance suite (%s)\n", kVersionString);
    criterion_1_nesting();
    criterion_2_kernel_counting();
    criterion_3_and_9_residual_sweep();
    criterion_4_quadrature_oracle();
    criterion_5_spectral_convergence();
    criterion_6_rotation_stability();
    criterion_7_cmcf();
    criterion_8_singular_case();
    std::printf("%d criterion failure(s)\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
