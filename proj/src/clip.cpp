#include "gridfem/clip.h"

#include <algorithm>
#include <cmath>

namespace gridfem {

namespace {

// Clip against the half-space  sign * (p[axis] - plane) <= 0, keeping the
// boundary. Intersection points are computed by linear interpolation along
// the edge, which keeps coordinates on axis-aligned planes bit-exact.
ConvexPoly clip_halfspace(const ConvexPoly& in, int axis, double plane, double sign) {
    ConvexPoly out;
    if (in.n == 0) return out;
    for (int i = 0; i < in.n; ++i) {
        const Vec3& p = in[i];
        const Vec3& q = in[(i + 1) % in.n];
        const double dp = sign * (p[axis] - plane);
        const double dq = sign * (q[axis] - plane);
        if (dp <= 0.0) {
            out.push(p);
            if (dq > 0.0) {
                const double t = dp / (dp - dq);
                Vec3 x = p + t * (q - p);
                x[axis] = plane;
                out.push(x);
            }
        } else if (dq <= 0.0) {
            const double t = dp / (dp - dq);
            Vec3 x = p + t * (q - p);
            x[axis] = plane;
            out.push(x);
        }
    }
    return out;
}

// Collapse consecutive duplicate vertices produced by clipping through a
// polygon vertex that lies exactly on a plane.
void dedupe(ConvexPoly& poly, double tol = 1e-14) {
    ConvexPoly out;
    for (int i = 0; i < poly.n; ++i) {
        const Vec3& p = poly[i];
        const Vec3& prev = poly[(i + poly.n - 1) % poly.n];
        if (poly.n > 1 && (p - prev).lpNorm<Eigen::Infinity>() <= tol) continue;
        out.push(p);
    }
    poly = out;
}

} // namespace

bool ConvexPoly::contains(const Vec3& p, double tol) const {
    if (n < 3) return false;
    Vec3 nrm = Vec3::Zero();
    for (int i = 1; i + 1 < n; ++i) nrm += (pts[static_cast<size_t>(i)] - pts[0]).cross(pts[static_cast<size_t>(i) + 1] - pts[0]);
    const double len = nrm.norm();
    if (len < 1e-300) return false;
    nrm /= len;
    if (std::abs((p - pts[0]).dot(nrm)) > tol) return false;
    for (int i = 0; i < n; ++i) {
        const Vec3& a = pts[static_cast<size_t>(i)];
        const Vec3& b = pts[static_cast<size_t>((i + 1) % n)];
        if ((b - a).cross(p - a).dot(nrm) < -tol) return false;
    }
    return true;
}

ConvexPoly clip_poly_to_box(const ConvexPoly& poly, const Box3& box) {
    ConvexPoly cur = poly;
    for (int axis = 0; axis < 3 && cur.n > 0; ++axis) {
        cur = clip_halfspace(cur, axis, box.lo[axis], -1.0);
        cur = clip_halfspace(cur, axis, box.hi[axis], +1.0);
    }
    dedupe(cur);
    return cur;
}

std::optional<ConvexPoly> clip_triangle_to_voxel(const Vec3& a, const Vec3& b, const Vec3& c,
                                                 const Box3& box) {
    ConvexPoly tri;
    tri.push(a);
    tri.push(b);
    tri.push(c);
    ConvexPoly clipped = clip_poly_to_box(tri, box);
    if (clipped.n < 3 || clipped.area() < 1e-14) return std::nullopt;
    return clipped;
}

bool segment_meets_box(const Vec3& a, const Vec3& b, const Box3& box, double tol) {
    double t0 = 0.0, t1 = 1.0;
    for (int axis = 0; axis < 3; ++axis) {
        const double lo = box.lo[axis] - tol, hi = box.hi[axis] + tol;
        const double d = b[axis] - a[axis];
        if (std::abs(d) < 1e-300) {
            if (a[axis] < lo || a[axis] > hi) return false;
            continue;
        }
        double te = (lo - a[axis]) / d;
        double tx = (hi - a[axis]) / d;
        if (te > tx) std::swap(te, tx);
        t0 = std::max(t0, te);
        t1 = std::min(t1, tx);
        if (t0 > t1) return false;
    }
    return true;
}

bool poly_meets_box(const ConvexPoly& poly, const Box3& box, double tol) {
    if (poly.n == 0) return false;
    Box3 grown{box.lo - Vec3::Constant(tol), box.hi + Vec3::Constant(tol)};
    ConvexPoly cur = poly;
    for (int axis = 0; axis < 3 && cur.n > 0; ++axis) {
        cur = clip_halfspace(cur, axis, grown.lo[axis], -1.0);
        cur = clip_halfspace(cur, axis, grown.hi[axis], +1.0);
    }
    return cur.n > 0;
}

} // namespace gridfem
