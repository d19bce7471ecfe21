// Command-line driver: connectivity-aware grid FEM experiments on triangle
// meshes. Subcommands: info, fit-color, spectrum, sweep-res, sweep-rot,
// flow, convergence.

#include "gridfem/analysis.h"
#include "gridfem/flow.h"
#include "gridfem/synthetic.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace gridfem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

struct Options {
    std::string config_path;
    std::string mesh_path;
    std::string out_dir = ".";
    int depth = 5;
    int min_depth = 0;
    std::string mode = "aware";
    double alpha = 0.01;
    double epsilon = 0.0;
    double pad = 0.05;
    std::string cycle = "w";
    int smooth = 10;
    int cycles = 1;
    uint64_t seed = 0;
    std::string synthetic_texture; // e.g. "checkerboard3d:2.0" or "ramp"
    bool dump_matrices = false;
    std::string forest_cache;
    bool sweep_min_depth = false;
    int eigs = 50;
    int rotations = 5;
    std::string depths = "3,4,5,6";
    // flow
    double delta = 0.0;
    double budget_seconds = 0.0;
    double total_time = 5.0;
    std::string solver = "mg";
    int ply_stride = 10;
    bool with_ground_truth = false;
    bool galerkin = false;
    bool quartet_mask = false;

    Mode mode_enum() const {
        if (mode == "aware") return Mode::Aware;
        if (mode == "unaware") return Mode::Unaware;
        throw CLI::ValidationError("--mode must be aware or unaware");
    }
    CycleShape cycle_enum() const {
        if (cycle == "w") return CycleShape::W;
        if (cycle == "v") return CycleShape::V;
        throw CLI::ValidationError("--cycle must be v or w");
    }

    std::map<std::string, std::string> resolved_pairs() const {
        std::map<std::string, std::string> kv;
        char buf[64];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            return std::string(buf);
        };
        kv["mesh"] = mesh_path;
        kv["depth"] = std::to_string(depth);
        kv["min-depth"] = std::to_string(min_depth);
        kv["mode"] = mode;
        kv["alpha"] = num(alpha);
        kv["epsilon"] = num(epsilon);
        kv["pad"] = num(pad);
        kv["cycle"] = cycle;
        kv["smooth"] = std::to_string(smooth);
        kv["cycles"] = std::to_string(cycles);
        kv["seed"] = std::to_string(seed);
        if (!synthetic_texture.empty()) kv["synthetic-texture"] = synthetic_texture;
        kv["eigs"] = std::to_string(eigs);
        kv["rotations"] = std::to_string(rotations);
        kv["depths"] = depths;
        kv["delta"] = num(delta);
        kv["budget-seconds"] = num(budget_seconds);
        kv["total-time"] = num(total_time);
        kv["solver"] = solver;
        if (galerkin) kv["galerkin"] = "1";
        if (quartet_mask) kv["quartet-mask"] = "1";
        return kv;
    }

    // sorted key=value view for output headers
    std::string resolved() const {
        std::string out;
        for (const auto& [k, v] : resolved_pairs()) out += " " + k + "=" + v;
        return out;
    }
};

void add_common_options(CLI::App* cmd, Options& opt) {
    cmd->add_option("--config", opt.config_path, "key=value config file; flags override");
    cmd->add_option("--mesh", opt.mesh_path, "input mesh (.obj or .ply)");
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--depth", opt.depth, "finest grid depth (N = 2^depth)");
    cmd->add_option("--min-depth", opt.min_depth, "coarsest multigrid depth");
    cmd->add_option("--mode", opt.mode, "aware | unaware");
    cmd->add_option("--alpha", opt.alpha, "screening weight");
    cmd->add_option("--epsilon", opt.epsilon, "diagonal regularization of L");
    cmd->add_option("--pad", opt.pad, "normalization padding");
    cmd->add_option("--cycle", opt.cycle, "v | w");
    cmd->add_option("--smooth", opt.smooth, "Gauss-Seidel iterations per smoothing pass");
    cmd->add_option("--cycles", opt.cycles, "multigrid cycles to run");
    cmd->add_option("--seed", opt.seed, "seed for randomized initial guesses");
    cmd->add_option("--synthetic-texture", opt.synthetic_texture,
                    "checkerboard3d:<period> or ramp (used when the mesh has no colors)");
    cmd->add_flag("--dump-matrices", opt.dump_matrices, "write Matrix Market dumps of L and M");
    cmd->add_option("--forest-cache", opt.forest_cache, "binary fragment-forest cache file");
    cmd->add_option("--eigs", opt.eigs, "eigenvalue count");
    cmd->add_option("--depths", opt.depths, "comma-separated depth list for sweep-res");
    cmd->add_option("--rotations", opt.rotations, "rotation count for sweep-rot");
    cmd->add_option("--delta", opt.delta, "flow stepsize");
    cmd->add_option("--budget-seconds", opt.budget_seconds, "flow wall-clock budget (sets delta)");
    cmd->add_option("--total-time", opt.total_time, "flow evolution time");
    cmd->add_option("--solver", opt.solver, "flow solver: mg | cg");
    cmd->add_option("--ply-stride", opt.ply_stride, "write every k-th flow step as PLY (0 = off)");
    cmd->add_flag("--with-ground-truth", opt.with_ground_truth,
                  "compare the flow against a cotangent reference trajectory");
    cmd->add_flag("--sweep-min-depth", opt.sweep_min_depth,
                  "emit residual-vs-min-depth sweep (fit-color)");
    cmd->add_flag("--galerkin", opt.galerkin,
                  "coarse operators as P^T A P instead of direct assembly");
    cmd->add_flag("--quartet-mask", opt.quartet_mask,
                  "use the quartet prolongation mask 1/4 (1 3 3 1) for comparison");
}

// Flat key=value config file; CLI flags override file values.
void apply_config_file(CLI::App& app, Options& opt) {
    if (opt.config_path.empty()) return;
    std::ifstream in(opt.config_path);
    if (!in) throw IoError("cannot open config file " + opt.config_path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("config line without '=': " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto subcommands = app.get_subcommands();
    CLI::App* cmd = subcommands.empty() ? &app : subcommands[0];
    auto set_if_unset = [&](const std::string& key, auto& field) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        const CLI::Option* o = cmd->get_option_no_throw("--" + key);
        if (o != nullptr && o->count() > 0) return; // CLI wins
        std::istringstream ss(it->second);
        ss >> field;
    };
    set_if_unset("mesh", opt.mesh_path);
    set_if_unset("out", opt.out_dir);
    set_if_unset("depth", opt.depth);
    set_if_unset("min-depth", opt.min_depth);
    set_if_unset("mode", opt.mode);
    set_if_unset("alpha", opt.alpha);
    set_if_unset("epsilon", opt.epsilon);
    set_if_unset("pad", opt.pad);
    set_if_unset("cycle", opt.cycle);
    set_if_unset("smooth", opt.smooth);
    set_if_unset("cycles", opt.cycles);
    set_if_unset("seed", opt.seed);
    set_if_unset("synthetic-texture", opt.synthetic_texture);
    set_if_unset("eigs", opt.eigs);
    set_if_unset("depths", opt.depths);
    set_if_unset("rotations", opt.rotations);
    set_if_unset("delta", opt.delta);
    set_if_unset("budget-seconds", opt.budget_seconds);
    set_if_unset("total-time", opt.total_time);
    set_if_unset("solver", opt.solver);
    set_if_unset("ply-stride", opt.ply_stride);
}

std::ofstream open_csv(const Options& opt, const std::string& name) {
    std::filesystem::create_directories(opt.out_dir);
    // resolved configuration, reusable via --config
    const std::string cfg_path = (std::filesystem::path(opt.out_dir) / "config_resolved.cfg").string();
    {
        std::ofstream cfg(cfg_path);
        for (const auto& [k, v] : opt.resolved_pairs()) cfg << k << '=' << v << '\n';
    }
    const std::string path = (std::filesystem::path(opt.out_dir) / name).string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "# " << kVersionString << "\n# config:" << opt.resolved() << "\n";
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

ProlongationMask mask_of(const Options& opt) {
    return opt.quartet_mask ? ProlongationMask::Quartet : ProlongationMask::Linear;
}

TriangleMesh load_input(const Options& opt, bool need_colors) {
    if (opt.mesh_path.empty()) throw CLI::ValidationError("--mesh is required");
    TriangleMesh mesh = load_mesh(opt.mesh_path);
    if (need_colors && !mesh.has_colors()) {
        if (opt.synthetic_texture.empty())
            throw IoError("mesh has no vertex colors; supply --synthetic-texture "
                          "checkerboard3d:<period> or ramp");
        if (opt.synthetic_texture.rfind("checkerboard3d", 0) == 0) {
            const size_t colon = opt.synthetic_texture.find(':');
            const double period = colon == std::string::npos
                                      ? 1.0
                                      : std::stod(opt.synthetic_texture.substr(colon + 1));
            apply_checkerboard3d(mesh, period);
        } else if (opt.synthetic_texture == "ramp") {
            apply_coordinate_ramp(mesh);
        } else {
            throw IoError("unknown synthetic texture '" + opt.synthetic_texture + "'");
        }
    }
    return mesh;
}

FragmentForest load_or_build_forest(const Options& opt, const TriangleMesh& mesh, int max_depth,
                                    int min_depth) {
    if (!opt.forest_cache.empty()) {
        const uint64_t hash = mesh_hash(mesh);
        if (auto cached = load_forest_cache(opt.forest_cache, hash, max_depth, min_depth, opt.pad))
            return std::move(*cached);
        FragmentForest forest = build_fragment_forest(mesh, max_depth, min_depth);
        save_forest_cache(forest, opt.forest_cache, hash, opt.pad);
        return forest;
    }
    return build_fragment_forest(mesh, max_depth, min_depth);
}

std::vector<Vector> color_channels(const TriangleMesh& mesh) {
    std::vector<Vector> channels(3, Vector(mesh.vertex_count()));
    for (int v = 0; v < mesh.vertex_count(); ++v)
        for (int c = 0; c < 3; ++c) channels[static_cast<size_t>(c)][v] = mesh.colors[static_cast<size_t>(v)][c];
    return channels;
}

// ---------------------------------------------------------------------------

int cmd_info(const Options& opt) {
    const TriangleMesh world = load_input(opt, false);
    auto [mesh, transform] = normalize(world, opt.pad);
    const FragmentForest forest = load_or_build_forest(opt, mesh, opt.depth, 0);

    std::printf("mesh: %s  vertices=%d faces=%d components=%zu\n", opt.mesh_path.c_str(),
                mesh.vertex_count(), mesh.face_count(), connected_components(mesh).size());
    const CotanOperator cot = cotan_operator(mesh);
    std::printf("cotangent system: dim=%d nnz/row=%.2f (grid systems below for comparison)\n",
                mesh.vertex_count(),
                static_cast<double>(cot.L_cot.nonZeros()) / std::max(mesh.vertex_count(), 1));
    std::printf("%5s %10s %12s %12s %12s %10s %12s\n", "depth", "fragments", "dim(unaware)",
                "dim(aware)", "nnz(L)", "nnz/row", "max I_k");

    std::ofstream hist = open_csv(opt, "component_histogram.csv");
    hist << "depth,components_per_corner,corner_count\n";

    for (int depth = 0; depth <= opt.depth; ++depth) {
        const FragmentLevel& level = forest.level_at(depth);
        const ComponentTable table = corner_components(level, mesh);
        const BasisIndex unaware = enumerate_basis(table, Mode::Unaware);
        const BasisIndex aware = enumerate_basis(table, Mode::Aware);
        const SparseSystem system = assemble(mesh, level, table,
                                             opt.mode_enum() == Mode::Aware ? aware : unaware, opt.epsilon);
        std::map<int, int> histogram;
        int max_components = 0;
        for (uint32_t ci = 0; ci < table.corners.size(); ++ci) {
            histogram[table.components_at(ci)]++;
            max_components = std::max(max_components, table.components_at(ci));
        }
        for (const auto& [count, corners] : histogram)
            hist << depth << ',' << count << ',' << corners << '\n';
        std::printf("%5d %10zu %12d %12d %12ld %10.2f %12d\n", depth, level.frags.size(),
                    unaware.dim, aware.dim, static_cast<long>(system.L.nonZeros()),
                    static_cast<double>(system.L.nonZeros()) / std::max(system.dim, 1), max_components);
        if (opt.dump_matrices && depth == opt.depth) {
            write_matrix_market(system.L, (std::filesystem::path(opt.out_dir) / "L.mtx").string());
            write_matrix_market(system.M, (std::filesystem::path(opt.out_dir) / "M.mtx").string());
        }
    }
    return 0;
}

// Shared by fit-color --sweep-min-depth and the convergence subcommand: the
// normalized one-W-cycle residual as a function of the solver's minimum depth.
std::vector<double> min_depth_residuals(const Options& opt, const MultigridHierarchy& h,
                                        const Vector& rhs) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector u0(h.finest().index.dim);
    for (int i = 0; i < u0.size(); ++i) u0[i] = unit(rng);

    std::vector<SpMat> all_ops = screened_operators(h, opt.alpha);
    const double r0 = (rhs - all_ops.back() * u0).norm();

    std::vector<double> residuals;
    for (int m = 0; m <= opt.depth; ++m) {
        std::vector<SpMat> ops(all_ops.begin() + m, all_ops.end());
        std::vector<const SpMat*> prolongations(ops.size(), nullptr);
        for (size_t l = 1; l < ops.size(); ++l)
            prolongations[l] = &h.levels[static_cast<size_t>(m) + l].P;
        MultigridSolver mg(std::move(ops), std::move(prolongations),
                           CycleConfig{opt.cycle_enum(), opt.smooth, 500, 2000});
        Vector u = u0;
        for (int c = 0; c < opt.cycles; ++c) mg.cycle(u, rhs);
        residuals.push_back((rhs - all_ops.back() * u).norm() / r0);
    }
    return residuals;
}

int cmd_fit_color(const Options& opt) {
    TriangleMesh world = load_input(opt, true);
    const std::vector<Vec3> world_colors = world.colors;
    auto [mesh, transform] = normalize(world, opt.pad);
    mesh.colors = world_colors;
    const FragmentForest forest = load_or_build_forest(opt, mesh, opt.depth, 0);
    const MultigridHierarchy h = build_hierarchy(mesh, forest, 0, opt.depth, opt.mode_enum(),
                                                 opt.epsilon, opt.galerkin, mask_of(opt));
    const HierarchyLevel& finest = h.finest();
    const auto loads =
        load_vectors(mesh, forest.level_at(opt.depth), finest.table, finest.index, color_channels(mesh));

    // solve the screened system per channel: seeded random initial guess in
    // [0,1], exactly the requested number of cycles
    MultigridSolver mg(screened_operators(h, opt.alpha), h,
                       CycleConfig{opt.cycle_enum(), opt.smooth, 500, 2000});
    const std::vector<VertexStencil> stencils =
        build_vertex_stencils(mesh, forest.level_at(opt.depth), finest.table, finest.index);

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    TriangleMesh fitted = mesh;
    fitted.colors.assign(static_cast<size_t>(mesh.vertex_count()), Vec3::Zero());
    std::ofstream res_csv = open_csv(opt, "fit_residuals.csv");
    res_csv << "channel,rel_residual\n";
    std::ofstream history = open_csv(opt, "residual_history.csv");
    history << "channel,cycle,level,residual\n";
    for (int c = 0; c < 3; ++c) {
        const Vector rhs = screened_rhs(loads[static_cast<size_t>(c)], opt.alpha);
        Vector u(finest.index.dim);
        for (int i = 0; i < u.size(); ++i) u[i] = unit(rng);
        const double r0 = (rhs - mg.op(mg.level_count() - 1) * u).norm();
        for (int cycle = 0; cycle < opt.cycles; ++cycle) {
            const CycleStats stats = mg.cycle(u, rhs);
            for (size_t level = 0; level < stats.post_residual.size(); ++level)
                history << c << ',' << cycle << ',' << level << ',' << fmt(stats.post_residual[level]) << '\n';
        }
        const double rel = (rhs - mg.op(mg.level_count() - 1) * u).norm() / std::max(r0, 1e-300);
        res_csv << c << ',' << fmt(rel) << '\n';
        for (int v = 0; v < mesh.vertex_count(); ++v)
            fitted.colors[static_cast<size_t>(v)][c] = std::clamp(stencils[static_cast<size_t>(v)].evaluate(u), 0.0, 1.0);
    }
    for (Vec3& v : fitted.vertices) v = transform.invert(v); // back to world coordinates
    std::filesystem::create_directories(opt.out_dir);
    save_mesh(fitted, (std::filesystem::path(opt.out_dir) / "fitted.ply").string(), MeshFormat::PLY);

    if (opt.sweep_min_depth) {
        std::ofstream sweep = open_csv(opt, "residual_vs_min_depth.csv");
        sweep << "min_depth,rel_residual\n";
        const Vector rhs = screened_rhs(loads[0], opt.alpha);
        const std::vector<double> residuals = min_depth_residuals(opt, h, rhs);
        for (size_t m = 0; m < residuals.size(); ++m)
            sweep << m << ',' << fmt(residuals[m]) << '\n';
    }
    if (opt.dump_matrices) {
        write_matrix_market(finest.system.L, (std::filesystem::path(opt.out_dir) / "L.mtx").string());
        write_matrix_market(finest.system.M, (std::filesystem::path(opt.out_dir) / "M.mtx").string());
    }
    return 0;
}

int cmd_convergence(const Options& opt) {
    TriangleMesh world = load_input(opt, true);
    const std::vector<Vec3> world_colors = world.colors;
    auto [mesh, transform] = normalize(world, opt.pad);
    mesh.colors = world_colors;
    const FragmentForest forest = load_or_build_forest(opt, mesh, opt.depth, 0);

    std::ofstream csv = open_csv(opt, "convergence.csv");
    csv << "min_depth,unaware,aware\n";
    std::map<Mode, std::vector<double>> results;
    for (Mode mode : {Mode::Unaware, Mode::Aware}) {
        const MultigridHierarchy h = build_hierarchy(mesh, forest, 0, opt.depth, mode, opt.epsilon,
                                                     opt.galerkin, mask_of(opt));
        const HierarchyLevel& finest = h.finest();
        const auto loads = load_vectors(mesh, forest.level_at(opt.depth), finest.table,
                                        finest.index, color_channels(mesh));
        results[mode] = min_depth_residuals(opt, h, screened_rhs(loads[0], opt.alpha));
    }
    for (int m = 0; m <= opt.depth; ++m)
        csv << m << ',' << fmt(results[Mode::Unaware][static_cast<size_t>(m)]) << ','
            << fmt(results[Mode::Aware][static_cast<size_t>(m)]) << '\n';
    return 0;
}

int cmd_spectrum(const Options& opt) {
    const TriangleMesh world = load_input(opt, false);
    auto [mesh, transform] = normalize(world, opt.pad);
    const FragmentForest forest = load_or_build_forest(opt, mesh, opt.depth, opt.depth);
    const FragmentLevel& level = forest.level_at(opt.depth);
    const ComponentTable table = corner_components(level, mesh);
    const BasisIndex index = enumerate_basis(table, opt.mode_enum());
    const SparseSystem system = assemble(mesh, level, table, index, opt.epsilon);
    const SpectrumReport report = spectrum(system, opt.eigs);
    const SpectrumReport reference = spectrum_cotan(cotan_operator(mesh), opt.eigs);

    std::ofstream csv = open_csv(opt, "spectrum.csv");
    csv << "depth,index,eigenvalue\n";
    for (size_t i = 0; i < report.eigenvalues.size(); ++i)
        csv << opt.depth << ',' << i + 1 << ',' << fmt(report.eigenvalues[i]) << '\n';
    for (size_t i = 0; i < reference.eigenvalues.size(); ++i)
        csv << -1 << ',' << i + 1 << ',' << fmt(reference.eigenvalues[i]) << '\n';
    std::printf("dim=%d near_zero=%d deviation=%s%s\n", system.dim,
                near_zero_count(report.eigenvalues),
                fmt(eigenvalue_deviation(report.eigenvalues, reference.eigenvalues, 2, opt.eigs)).c_str(),
                report.converged ? "" : " (partial)");
    if (!report.converged) return kExitNumerical;
    return 0;
}

int cmd_sweep_res(const Options& opt) {
    const TriangleMesh world = load_input(opt, false);
    auto [mesh, transform] = normalize(world, opt.pad);
    std::vector<int> depths;
    std::stringstream ss(opt.depths);
    for (std::string token; std::getline(ss, token, ',');) depths.push_back(std::stoi(token));
    const ResolutionSweepResult sweep = resolution_sweep(mesh, depths, opt.mode_enum(), opt.eigs);

    std::ofstream csv = open_csv(opt, "sweep_res.csv");
    csv << "depth,index,eigenvalue\n";
    for (const auto& row : sweep.rows)
        for (size_t i = 0; i < row.report.eigenvalues.size(); ++i)
            csv << row.depth << ',' << i + 1 << ',' << fmt(row.report.eigenvalues[i]) << '\n';
    for (size_t i = 0; i < sweep.reference.eigenvalues.size(); ++i)
        csv << -1 << ',' << i + 1 << ',' << fmt(sweep.reference.eigenvalues[i]) << '\n';

    std::ofstream dev = open_csv(opt, "sweep_res_deviation.csv");
    dev << "depth,dim,rms_deviation\n";
    for (const auto& row : sweep.rows) {
        dev << row.depth << ',' << row.dim << ',' << fmt(row.deviation) << '\n';
        std::printf("depth=%d dim=%d deviation=%s\n", row.depth, row.dim, fmt(row.deviation).c_str());
    }
    return 0;
}

int cmd_sweep_rot(const Options& opt) {
    const TriangleMesh world = load_input(opt, false);
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss;
    std::vector<Eigen::Matrix3d> rotations;
    for (int r = 0; r < opt.rotations; ++r) {
        Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        q.normalize();
        rotations.push_back(q.toRotationMatrix());
    }
    const RotationSweepResult sweep = rotation_sweep(world, rotations, opt.depth, opt.mode_enum(),
                                                     opt.eigs, opt.pad);
    std::ofstream csv = open_csv(opt, "sweep_rot.csv");
    csv << "rotation,index,eigenvalue\n";
    for (size_t r = 0; r < sweep.reports.size(); ++r)
        for (size_t i = 0; i < sweep.reports[r].eigenvalues.size(); ++i)
            csv << r << ',' << i + 1 << ',' << fmt(sweep.reports[r].eigenvalues[i]) << '\n';
    std::ofstream spread = open_csv(opt, "sweep_rot_spread.csv");
    spread << "index,relative_spread\n";
    for (size_t i = 0; i < sweep.spread.size(); ++i) spread << i + 1 << ',' << fmt(sweep.spread[i]) << '\n';
    return 0;
}

int cmd_flow(const Options& opt) {
    const TriangleMesh world = load_input(opt, false);
    FlowConfig config;
    config.depth = opt.depth;
    config.min_depth = opt.min_depth;
    config.mode = opt.mode_enum();
    config.solver = opt.solver == "cg" ? FlowSolver::CG : FlowSolver::Multigrid;
    config.delta = opt.delta;
    config.budget_seconds = opt.budget_seconds;
    config.total_time = opt.total_time;
    config.epsilon = opt.epsilon;
    config.cycle = opt.cycle_enum();
    config.smooth_iterations = opt.smooth;

    const FlowContext context = build_flow_context(world, config, opt.pad);

    std::vector<std::vector<Vec3>> ground_truth;
    if (opt.with_ground_truth) {
        if (config.delta <= 0.0)
            throw IoError("--with-ground-truth requires a fixed --delta (budget mode is wall-clock)");
        const int steps = static_cast<int>(std::llround(config.total_time / config.delta));
        ground_truth = cotan_cmcf_trajectory(context.mesh, config.delta, steps);
    }
    const FlowResult result =
        run_flow(context, config, ground_truth.empty() ? nullptr : &ground_truth);

    std::ofstream metrics = open_csv(opt, "flow_metrics.csv");
    metrics << "step,time,sphericity,rms\n";
    for (const auto& row : result.metrics)
        metrics << row.step << ',' << fmt(row.time) << ',' << fmt(row.sphericity) << ','
                << (std::isnan(row.rms) ? std::string() : fmt(row.rms)) << '\n';
    // wall-clock timings go to a separate file so the metrics CSV stays
    // byte-reproducible across runs
    std::ofstream timings = open_csv(opt, "flow_timings.csv");
    timings << "step,solve_seconds\n";
    for (const auto& row : result.metrics) timings << row.step << ',' << fmt(row.solve_seconds) << '\n';

    if (opt.ply_stride > 0) {
        std::filesystem::create_directories(opt.out_dir);
        for (size_t s = 0; s < result.trajectory.size(); s += static_cast<size_t>(opt.ply_stride)) {
            TriangleMesh evolved = context.mesh;
            evolved.vertices = result.trajectory[s].evolved_positions;
            for (Vec3& v : evolved.vertices) v = context.transform.invert(v);
            char name[64];
            std::snprintf(name, sizeof(name), "flow_%04zu.ply", s);
            save_mesh(evolved, (std::filesystem::path(opt.out_dir) / name).string(), MeshFormat::PLY);
        }
    }
    std::printf("flow: steps=%d delta=%s final_sphericity=%s\n", result.steps,
                fmt(result.delta_used).c_str(), fmt(result.metrics.back().sphericity).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"connectivity-aware grid FEM on triangle meshes"};
    app.require_subcommand(1);
    Options opt;

    CLI::App* info = app.add_subcommand("info", "per-level space dimensions and sparsity");
    CLI::App* fit = app.add_subcommand("fit-color", "screened-Poisson color fitting");
    CLI::App* spectrum_cmd = app.add_subcommand("spectrum", "generalized eigenvalues vs the cotangent reference");
    CLI::App* sweep_res = app.add_subcommand("sweep-res", "spectra across grid depths");
    CLI::App* sweep_rot = app.add_subcommand("sweep-rot", "spectra across random rotations");
    CLI::App* flow_cmd = app.add_subcommand("flow", "conformalized mean-curvature flow");
    CLI::App* convergence = app.add_subcommand("convergence", "one-cycle residual vs minimum depth, both modes");
    for (CLI::App* cmd : {info, fit, spectrum_cmd, sweep_res, sweep_rot, flow_cmd, convergence})
        add_common_options(cmd, opt);

    try {
        app.parse(argc, argv);
        apply_config_file(app, opt);
        if (info->parsed()) return cmd_info(opt);
        if (fit->parsed()) return cmd_fit_color(opt);
        if (spectrum_cmd->parsed()) return cmd_spectrum(opt);
        if (sweep_res->parsed()) return cmd_sweep_res(opt);
        if (sweep_rot->parsed()) return cmd_sweep_rot(opt);
        if (flow_cmd->parsed()) return cmd_flow(opt);
        if (convergence->parsed()) return cmd_convergence(opt);
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : kExitUsage;
    } catch (const IoError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitInput;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
