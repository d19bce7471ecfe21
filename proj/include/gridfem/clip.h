#pragma once

#include "gridfem/core.h"

#include <array>
#include <cassert>
#include <optional>

namespace gridfem {

/// Planar convex polygon with fixed-capacity storage. A triangle clipped by a
/// box keeps at most 9 vertices (3 triangle edges + up to 6 box-plane cuts);
/// intermediate polygons while re-clipping a stored fragment against a child
/// box can carry up to 3 more (the parent planes that are not child planes).
struct ConvexPoly {
    static constexpr int kMaxVerts = 12;
    std::array<Vec3, kMaxVerts> pts;
    int n = 0;

    void push(const Vec3& p) {
        assert(n < kMaxVerts);
        pts[static_cast<size_t>(n++)] = p;
    }
    const Vec3& operator[](int i) const { return pts[static_cast<size_t>(i)]; }
    Vec3& operator[](int i) { return pts[static_cast<size_t>(i)]; }

    double area() const {
        Vec3 s = Vec3::Zero();
        for (int i = 1; i + 1 < n; ++i) s += (pts[static_cast<size_t>(i)] - pts[0]).cross(pts[static_cast<size_t>(i) + 1] - pts[0]);
        return 0.5 * s.norm();
    }
    Vec3 centroid() const {
        Vec3 c = Vec3::Zero();
        for (int i = 0; i < n; ++i) c += pts[static_cast<size_t>(i)];
        return c / std::max(n, 1);
    }
    /// True when p lies in the polygon, tested in the polygon's plane.
    bool contains(const Vec3& p, double tol = 1e-9) const;
};

/// Sutherland-Hodgman clip of a convex polygon against the closed box,
/// one axis-aligned half-space at a time. Degenerate (zero-area) results are
/// kept; callers decide whether to discard them.
ConvexPoly clip_poly_to_box(const ConvexPoly& poly, const Box3& box);

/// triangle ∩ box, or nullopt when the intersection has zero area
/// (area < 1e-14). Vertex order follows the triangle's orientation.
std::optional<ConvexPoly> clip_triangle_to_voxel(const Vec3& a, const Vec3& b, const Vec3& c,
                                                 const Box3& box);

/// True when the segment [a,b] meets the closed (possibly degenerate) box.
bool segment_meets_box(const Vec3& a, const Vec3& b, const Box3& box, double tol = 1e-12);

/// True when any part of the polygon meets the closed (possibly degenerate)
/// box. Used for touching tests against flat inter-voxel boxes.
bool poly_meets_box(const ConvexPoly& poly, const Box3& box, double tol = 1e-12);

} // namespace gridfem
