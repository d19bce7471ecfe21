#pragma once

#include "gridfem/clip.h"

#include <vector>

namespace gridfem {

/// Symmetric Gauss rule on the reference triangle, stored in barycentric
/// coordinates with weights summing to 1 (scaled by triangle area on use).
struct TriangleRule {
    struct Point {
        double b0, b1, b2, w;
    };
    int degree = 0; // integrates bivariate polynomials up to this total degree exactly
    std::vector<Point> points;
};

/// Degree-4 exact, 6 points. Stiffness integrands (products of two in-plane
/// gradients of trilinear splines) have total degree <= 4 on a plane.
const TriangleRule& triangle_rule_degree4();

/// Degree-6 exact, 12 points. Mass integrands (products of two restricted
/// trilinear splines) have total degree <= 6 on a plane.
const TriangleRule& triangle_rule_degree6();

/// Quadrature over a planar convex polygon by fanning from vertex 0.
/// Calls f(point, weight); weights sum to the polygon area.
template <typename F>
void for_each_quadrature_point(const ConvexPoly& poly, const TriangleRule& rule, F&& f) {
    for (int i = 1; i + 1 < poly.n; ++i) {
        const Vec3& a = poly[0];
        const Vec3& b = poly[i];
        const Vec3& c = poly[i + 1];
        const double area = 0.5 * (b - a).cross(c - a).norm();
        if (area <= 0.0) continue;
        for (const TriangleRule::Point& q : rule.points)
            f(Vec3(q.b0 * a + q.b1 * b + q.b2 * c), q.w * area);
    }
}

} // namespace gridfem
