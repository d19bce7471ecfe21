#include "gridfem/analysis.h"
#include "gridfem/synthetic.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace gridfem {

namespace {

// Jacobi-preconditioned CG for the SPD inner solves of the Lanczos iteration.
void pcg(const SpMat& A, const Vector& rhs, Vector& x, double tol, int max_iter) {
    const double dmax = A.diagonal().maxCoeff();
    const Vector diag_inv = A.diagonal().cwiseMax(std::max(1e-14 * dmax, 1e-300)).cwiseInverse();
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        x.setZero();
        return;
    }
    Vector r = rhs - A * x;
    Vector z = diag_inv.cwiseProduct(r);
    Vector p = z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iter; ++it) {
        if (r.norm() / rhs_norm <= tol) break;
        const Vector Ap = A * p;
        const double pAp = p.dot(Ap);
        if (pAp <= 0.0 || !std::isfinite(pAp)) break;
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        z = diag_inv.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
}

// Restriction of some basis functions to thin geometry can be nearly
// dependent, leaving M severely ill-conditioned (exactly singular for
// axis-aligned planes). Filter the mass spectrum: directions with
// negligible surface mass carry no representable function and are removed
// before the standard symmetric solve.
EigenPairs dense_generalized(const SpMat& L, const SpMat& M, int m) {
    EigenPairs out;
    const Eigen::MatrixXd Ld(L), Md(M);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> mass(Md);
    if (mass.info() != Eigen::Success) throw NumericalError("mass eigendecomposition failed");
    const double smax = mass.eigenvalues().maxCoeff();
    if (smax <= 0.0) throw NumericalError("mass matrix has no positive spectrum");
    const double cutoff = 1e-12 * smax;
    int first = 0;
    while (first < mass.eigenvalues().size() && mass.eigenvalues()[first] <= cutoff) ++first;
    const int kept = static_cast<int>(mass.eigenvalues().size()) - first;
    if (kept == 0) throw NumericalError("mass matrix numerically zero");

    const Eigen::MatrixXd V = mass.eigenvectors().rightCols(kept);
    const Eigen::VectorXd sqrt_inv = mass.eigenvalues().tail(kept).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd W = V * sqrt_inv.asDiagonal();
    const Eigen::MatrixXd B = W.transpose() * Ld * W;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (B + B.transpose()));
    if (solver.info() != Eigen::Success) throw NumericalError("dense generalized eigensolver failed");
    const int keep = std::min(m, kept);
    out.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + keep);
    out.vectors = W * solver.eigenvectors().leftCols(keep);
    return out;
}

// Shift-invert Lanczos on K = L + c*M in the M-inner product: eigenvalues mu
// of K^{-1} M map back exactly through lambda = 1/mu - c, largest mu first.
// Restarted with deflation against converged Ritz vectors; a single Krylov
// sequence cannot see more than one copy of a multiple eigenvalue.
EigenPairs lanczos_generalized(const SpMat& L, const SpMat& M, int m, double residual_tol) {
    const int n = static_cast<int>(L.rows());
    const double trace_ratio = std::max(L.diagonal().sum(), 1e-30) / std::max(M.diagonal().sum(), 1e-30);
    const double c = 1e-3 * trace_ratio;
    const SpMat K = L + c * M;

    std::vector<Vector> locked;       // M-orthonormal converged Ritz vectors
    std::vector<double> locked_mu;    // their mu values
    std::mt19937_64 rng(20240601);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto m_orthogonalize = [&](Vector& w) {
        for (int pass = 0; pass < 2; ++pass) {
            const Vector Mw = M * w;
            for (const Vector& x : locked) w -= x.dot(Mw) * x;
        }
    };

    // A missed copy of a multiple eigenvalue dominates the deflated operator,
    // so restarts continue until a pass discovers nothing inside the
    // smallest-m window.
    auto mth_lambda = [&]() {
        if (static_cast<int>(locked_mu.size()) < m) return std::numeric_limits<double>::infinity();
        std::vector<double> mus = locked_mu;
        std::nth_element(mus.begin(), mus.begin() + (m - 1), mus.end(), std::greater<double>());
        const double mu_m = mus[static_cast<size_t>(m) - 1];
        return mu_m > 1e-300 ? 1.0 / mu_m - c : std::numeric_limits<double>::infinity();
    };
    const int per_restart = std::min(n, std::max(2 * m + 60, 100));
    bool window_stable = false;
    for (int restart = 0; restart < 6 && !window_stable; ++restart) {
        const double window_before = mth_lambda();
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = gauss(rng);
        m_orthogonalize(v);
        const double vnorm = std::sqrt(std::max(v.dot(M * v), 0.0));
        if (vnorm < 1e-150) break; // deflated space exhausts the mass range
        v /= vnorm;

        std::vector<Vector> q{v};
        std::vector<double> alpha, beta;
        Vector w(n);
        for (int j = 0; j < per_restart; ++j) {
            const Vector Mq = M * q[static_cast<size_t>(j)];
            w.setZero();
            pcg(K, Mq, w, 1e-12, 4 * n);
            const double a = w.dot(Mq);
            alpha.push_back(a);
            w -= a * q[static_cast<size_t>(j)];
            if (j > 0) w -= beta[static_cast<size_t>(j) - 1] * q[static_cast<size_t>(j) - 1];
            for (int pass = 0; pass < 2; ++pass) { // full reorthogonalization (Krylov + locked)
                const Vector Mw = M * w;
                for (const Vector& qi : q) w -= qi.dot(Mw) * qi;
                m_orthogonalize(w);
            }
            const double b = std::sqrt(std::max(w.dot(M * w), 0.0));
            if (b < 1e-13) break;
            beta.push_back(b);
            q.push_back(w / b);
        }

        const int k = static_cast<int>(alpha.size());
        if (k == 0) break;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
        for (int i = 0; i < k; ++i) {
            T(i, i) = alpha[static_cast<size_t>(i)];
            if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[static_cast<size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tsolver(T);
        const Eigen::VectorXd mu = tsolver.eigenvalues(); // ascending
        const Eigen::MatrixXd S = tsolver.eigenvectors();
        const double mu_scale = std::abs(mu[k - 1]);
        const double last_beta = beta.empty() ? 0.0 : beta.back();
        int taken = 0;
        int taken_in_window = 0;
        for (int i = k - 1; i >= 0 && taken < m + 4; --i) { // largest mu first
            const double bound = (static_cast<int>(beta.size()) == k) ? last_beta * std::abs(S(k - 1, i)) : 0.0;
            if (bound > 1e-9 * std::max(std::abs(mu[i]), 1e-3 * mu_scale)) continue;
            Vector x = Vector::Zero(n);
            for (int jj = 0; jj < k; ++jj) x += S(jj, i) * q[static_cast<size_t>(jj)];
            const double xnorm = std::sqrt(std::max(x.dot(M * x), 0.0));
            if (xnorm < 1e-150) continue;
            const double lambda = mu[i] > 1e-300 ? 1.0 / mu[i] - c : std::numeric_limits<double>::infinity();
            if (lambda <= window_before * (1.0 + 1e-12) + 1e-300) ++taken_in_window;
            locked.push_back(x / xnorm);
            locked_mu.push_back(mu[i]);
            ++taken;
        }
        if (taken == 0) break; // no further progress
        window_stable = static_cast<int>(locked.size()) >= m && taken_in_window == 0;
    }

    EigenPairs out;
    std::vector<int> order(locked.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return locked_mu[static_cast<size_t>(a)] > locked_mu[static_cast<size_t>(b)]; });
    const int keep = std::min<int>(m, static_cast<int>(order.size()));
    out.values.resize(static_cast<size_t>(keep));
    out.vectors.resize(n, keep);
    for (int i = 0; i < keep; ++i) {
        const double mu_i = locked_mu[static_cast<size_t>(order[static_cast<size_t>(i)])];
        out.values[static_cast<size_t>(i)] = mu_i > 1e-300 ? 1.0 / mu_i - c : std::numeric_limits<double>::infinity();
        out.vectors.col(i) = locked[static_cast<size_t>(order[static_cast<size_t>(i)])];
    }
    std::vector<int> asc(static_cast<size_t>(keep));
    std::iota(asc.begin(), asc.end(), 0);
    std::sort(asc.begin(), asc.end(), [&](int a, int b) { return out.values[static_cast<size_t>(a)] < out.values[static_cast<size_t>(b)]; });
    EigenPairs sorted;
    sorted.values.resize(static_cast<size_t>(keep));
    sorted.vectors.resize(n, keep);
    for (int i = 0; i < keep; ++i) {
        sorted.values[static_cast<size_t>(i)] = out.values[static_cast<size_t>(asc[static_cast<size_t>(i)])];
        sorted.vectors.col(i) = out.vectors.col(asc[static_cast<size_t>(i)]);
    }
    if (keep < m) sorted.converged = false;

    for (int i = 0; i < keep; ++i) {
        const Vector x = sorted.vectors.col(i);
        const double res = (L * x - sorted.values[static_cast<size_t>(i)] * (M * x)).norm() / std::max(x.norm(), 1e-300);
        const double scale = std::max(std::abs(sorted.values.back()), trace_ratio);
        if (!(res <= residual_tol * std::max(1.0, scale))) sorted.converged = false;
    }
    return sorted;
}

} // namespace

EigenPairs smallest_generalized_eigenpairs(const SpMat& L, const SpMat& M, int m,
                                           double residual_tol) {
    if (L.rows() != M.rows()) throw NumericalError("eigenpairs: dimension mismatch");
    if (m <= 0 || L.rows() == 0) return {};
    m = std::min<int>(m, static_cast<int>(L.rows()));
    if (L.rows() <= 2000) return dense_generalized(L, M, m);
    return lanczos_generalized(L, M, m, residual_tol);
}

SpectrumReport spectrum(const SparseSystem& system, int m) {
    SpectrumReport report;
    report.mode = system.mode;
    report.depth = system.depth;
    EigenPairs pairs = smallest_generalized_eigenpairs(system.L, system.M, m);
    report.eigenvalues = std::move(pairs.values);
    report.converged = pairs.converged;
    return report;
}

SpectrumReport spectrum_cotan(const CotanOperator& op, int m) {
    SpectrumReport report;
    report.depth = -1;
    EigenPairs pairs = smallest_generalized_eigenpairs(op.L_cot, op.M_cot, m);
    report.eigenvalues = std::move(pairs.values);
    report.converged = pairs.converged;
    return report;
}

int near_zero_count(const std::vector<double>& eigenvalues, double rel_tol) {
    if (eigenvalues.empty()) return 0;
    const double scale = std::abs(eigenvalues.back());
    int count = 0;
    for (double v : eigenvalues)
        if (std::abs(v) < rel_tol * scale) ++count;
    return count;
}

double eigenvalue_deviation(const std::vector<double>& eigenvalues,
                            const std::vector<double>& reference, int lo, int hi) {
    const int n = static_cast<int>(std::min(eigenvalues.size(), reference.size()));
    hi = std::min(hi, n);
    if (hi < lo) return 0.0;
    const double kernel_tol = 1e-8 * std::abs(reference[static_cast<size_t>(hi) - 1]);
    double sum = 0.0;
    int count = 0;
    for (int i = lo; i <= hi; ++i) {
        const double ref = reference[static_cast<size_t>(i) - 1];
        if (std::abs(ref) <= kernel_tol) continue; // reference kernel skipped
        const double dev = (eigenvalues[static_cast<size_t>(i) - 1] - ref) / ref;
        sum += dev * dev;
        ++count;
    }
    return count > 0 ? std::sqrt(sum / count) : 0.0;
}

ResolutionSweepResult resolution_sweep(const TriangleMesh& normalized_mesh,
                                       const std::vector<int>& depths, Mode mode, int m) {
    if (!std::is_sorted(depths.begin(), depths.end()))
        throw IoError("resolution_sweep: depths must be ascending");
    ResolutionSweepResult result;
    result.reference = spectrum_cotan(cotan_operator(normalized_mesh), m);
    for (int depth : depths) {
        const FragmentForest forest = build_fragment_forest(normalized_mesh, depth, depth);
        const FragmentLevel& level = forest.level_at(depth);
        const ComponentTable table = corner_components(level, normalized_mesh);
        const BasisIndex index = enumerate_basis(table, mode);
        const SparseSystem system = assemble(normalized_mesh, level, table, index);
        ResolutionSweepRow row;
        row.depth = depth;
        row.dim = index.dim;
        row.report = spectrum(system, m);
        row.deviation = eigenvalue_deviation(row.report.eigenvalues, result.reference.eigenvalues, 2, m);
        result.rows.push_back(std::move(row));
    }
    return result;
}

RotationSweepResult rotation_sweep(const TriangleMesh& world_mesh,
                                   const std::vector<Eigen::Matrix3d>& rotations, int depth,
                                   Mode mode, int m, double pad) {
    RotationSweepResult result;
    for (const Eigen::Matrix3d& r : rotations) {
        if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-9 ||
            std::abs(r.determinant() - 1.0) > 1e-9)
            throw IoError("rotation_sweep: rotations must be orthonormal with det = 1");
        auto [mesh_n, transform] = normalize(rotated(world_mesh, r), pad);
        const FragmentForest forest = build_fragment_forest(mesh_n, depth, depth);
        const FragmentLevel& level = forest.level_at(depth);
        const ComponentTable table = corner_components(level, mesh_n);
        const BasisIndex index = enumerate_basis(table, mode);
        const SparseSystem system = assemble(mesh_n, level, table, index);
        SpectrumReport report = spectrum(system, m);
        // back to world scale: lambda scales with 1/length^2
        for (double& v : report.eigenvalues) v *= transform.scale * transform.scale;
        result.reports.push_back(std::move(report));
    }

    size_t count = 0;
    for (const auto& rep : result.reports) count = std::max(count, rep.eigenvalues.size());
    result.spread.assign(count, 0.0);
    for (size_t i = 0; i < count; ++i) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, mean = 0.0;
        int present = 0;
        for (const auto& rep : result.reports) {
            if (i >= rep.eigenvalues.size()) continue;
            const double v = rep.eigenvalues[i];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            mean += v;
            ++present;
        }
        if (present == 0) continue;
        mean /= present;
        double scale = std::abs(mean);
        if (!result.reports.empty() && !result.reports.front().eigenvalues.empty())
            scale = std::max(scale, 1e-12 * std::abs(result.reports.front().eigenvalues.back()));
        result.spread[i] = (hi - lo) / std::max(scale, 1e-300);
    }
    return result;
}

double rms_error(const std::vector<Vec3>& evolved, const std::vector<Vec3>& ground_truth) {
    if (evolved.size() != ground_truth.size())
        throw IoError("rms_error: vertex count mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < evolved.size(); ++i) sum += (evolved[i] - ground_truth[i]).squaredNorm();
    return std::sqrt(sum);
}

double rms_error(const TriangleMesh& evolved, const TriangleMesh& ground_truth) {
    return rms_error(evolved.vertices, ground_truth.vertices);
}

double rms_error_normalized(const std::vector<Vec3>& evolved, const std::vector<Vec3>& ground_truth) {
    if (evolved.empty()) return 0.0;
    const double total = rms_error(evolved, ground_truth);
    return total / std::sqrt(static_cast<double>(evolved.size()));
}

double sphericity(const std::vector<Vec3>& points) {
    if (points.empty()) return 0.0;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : points) centroid += p;
    centroid /= static_cast<double>(points.size());
    double mean = 0.0, mean_sq = 0.0;
    for (const Vec3& p : points) {
        const double r = (p - centroid).norm();
        mean += r;
        mean_sq += r * r;
    }
    mean /= static_cast<double>(points.size());
    mean_sq /= static_cast<double>(points.size());
    const double var = std::max(mean_sq - mean * mean, 0.0);
    return std::sqrt(var) / std::max(mean, 1e-300);
}

} // namespace gridfem
