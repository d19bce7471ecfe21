#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace gridfem {

using Vec3 = Eigen::Vector3d;

inline constexpr const char* kVersionString = "gridfem 0.1.0";

/// Input/parse problems (bad files, missing attributes). CLI maps these to exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failures (solver divergence, NaN, singular systems where a solve
/// was required). CLI maps these to exit code 4.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-fatal diagnostics (degenerate faces, clamped weights, skipped rows).
inline void warn(const std::string& msg) { std::fprintf(stderr, "[gridfem warn] %s\n", msg.c_str()); }

/// Axis-aligned box, closed on all sides.
struct Box3 {
    Vec3 lo{0, 0, 0};
    Vec3 hi{0, 0, 0};

    bool contains(const Vec3& p, double tol = 0.0) const {
        return p.x() >= lo.x() - tol && p.x() <= hi.x() + tol && p.y() >= lo.y() - tol &&
               p.y() <= hi.y() + tol && p.z() >= lo.z() - tol && p.z() <= hi.z() + tol;
    }
    /// Component-wise intersection; may be degenerate (zero extent) or inverted (empty).
    Box3 intersect(const Box3& o) const {
        return {lo.cwiseMax(o.lo), hi.cwiseMin(o.hi)};
    }
    bool empty(double tol = 0.0) const {
        return hi.x() < lo.x() - tol || hi.y() < lo.y() - tol || hi.z() < lo.z() - tol;
    }
};

} // namespace gridfem
