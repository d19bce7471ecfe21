#include "gridfem/synthetic.h"

#include <Eigen/Geometry>
#include <cmath>
#include <map>
#include <numbers>

namespace gridfem {

namespace {

void finish(TriangleMesh& mesh) { mesh.material_positions = mesh.vertices; }

void append_cube(TriangleMesh& mesh, const Vec3& lo, double s, int segments = 1) {
    const int base = mesh.vertex_count();
    // integer lattice points on the shell, welded across faces
    std::map<std::array<int, 3>, int> vid;
    auto vertex = [&](int i, int j, int k) {
        auto [it, inserted] = vid.try_emplace({i, j, k}, base + static_cast<int>(vid.size()));
        if (inserted)
            mesh.vertices.push_back(lo + (s / segments) * Vec3(i, j, k));
        return it->second;
    };
    // quad (a,b,c,d) counter-clockwise seen from outside
    auto emit = [&](int a, int b, int c, int d) {
        mesh.faces.push_back({a, b, c});
        mesh.faces.push_back({a, c, d});
    };
    const int n = segments;
    for (int v = 0; v < n; ++v)
        for (int u = 0; u < n; ++u) {
            emit(vertex(u, v + 1, 0), vertex(u + 1, v + 1, 0), vertex(u + 1, v, 0), vertex(u, v, 0)); // z = lo
            emit(vertex(u, v, n), vertex(u + 1, v, n), vertex(u + 1, v + 1, n), vertex(u, v + 1, n)); // z = hi
            emit(vertex(u, 0, v), vertex(u + 1, 0, v), vertex(u + 1, 0, v + 1), vertex(u, 0, v + 1)); // y = lo
            emit(vertex(u, n, v + 1), vertex(u + 1, n, v + 1), vertex(u + 1, n, v), vertex(u, n, v)); // y = hi
            emit(vertex(0, u, v + 1), vertex(0, u + 1, v + 1), vertex(0, u + 1, v), vertex(0, u, v)); // x = lo
            emit(vertex(n, u, v), vertex(n, u + 1, v), vertex(n, u + 1, v + 1), vertex(n, u, v + 1)); // x = hi
        }
}

} // namespace

TriangleMesh make_single_triangle() {
    TriangleMesh mesh;
    mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    mesh.faces = {{0, 1, 2}};
    finish(mesh);
    return mesh;
}

TriangleMesh make_cube(const Vec3& min_corner, double size) {
    TriangleMesh mesh;
    append_cube(mesh, min_corner, size);
    finish(mesh);
    return mesh;
}

TriangleMesh make_cube_lattice(int n, double gap, int segments) {
    TriangleMesh mesh;
    const double pitch = 1.0 + gap;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                append_cube(mesh, Vec3(i * pitch, j * pitch, k * pitch), 1.0, segments);
    finish(mesh);
    return mesh;
}

TriangleMesh make_icosphere(int subdivisions, double radius, const Vec3& center) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
    };
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    for (Vec3& v : verts) v.normalize();

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 m = (verts[static_cast<size_t>(a)] + verts[static_cast<size_t>(b)]).normalized();
            verts.push_back(m);
            const int id = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    TriangleMesh mesh;
    mesh.vertices.reserve(verts.size());
    for (const Vec3& v : verts) mesh.vertices.push_back(center + radius * v);
    mesh.faces = std::move(faces);
    finish(mesh);
    return mesh;
}

TriangleMesh make_two_hemispheres(int rings, int segments, double radius, double gap) {
    if (rings % 2 != 0) ++rings; // even ring count so the equator is a vertex ring
    TriangleMesh mesh;
    constexpr double pi = std::numbers::pi;
    auto build_cap = [&](bool north) {
        const int base = mesh.vertex_count();
        const double zshift = (north ? 1.0 : -1.0) * gap / 2.0;
        // rows 0..rings/2: from pole to equator
        const int rows = rings / 2;
        mesh.vertices.push_back(Vec3(0, 0, (north ? radius : -radius) + zshift));
        for (int r = 1; r <= rows; ++r) {
            const double theta = pi * r / rings; // polar angle from the north pole
            const double polar = north ? theta : pi - theta;
            for (int s = 0; s < segments; ++s) {
                const double phi = 2.0 * pi * s / segments;
                mesh.vertices.push_back(Vec3(radius * std::sin(polar) * std::cos(phi),
                                             radius * std::sin(polar) * std::sin(phi),
                                             radius * std::cos(polar) + zshift));
            }
        }
        auto ring_vertex = [&](int r, int s) { return base + 1 + (r - 1) * segments + (s % segments); };
        for (int s = 0; s < segments; ++s) {
            if (north)
                mesh.faces.push_back({base, ring_vertex(1, s), ring_vertex(1, s + 1)});
            else
                mesh.faces.push_back({base, ring_vertex(1, s + 1), ring_vertex(1, s)});
        }
        for (int r = 1; r < rows; ++r)
            for (int s = 0; s < segments; ++s) {
                const int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
                const int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
                if (north) {
                    mesh.faces.push_back({a, c, d});
                    mesh.faces.push_back({a, d, b});
                } else {
                    mesh.faces.push_back({a, d, c});
                    mesh.faces.push_back({a, b, d});
                }
            }
    };
    build_cap(true);
    build_cap(false);
    finish(mesh);
    return mesh;
}

TriangleMesh make_two_sheets(int n, double gap, bool generic_rotation) {
    TriangleMesh mesh;
    auto add_sheet = [&](double z) {
        const int base = mesh.vertex_count();
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i)
                mesh.vertices.push_back(Vec3(static_cast<double>(i) / n, static_cast<double>(j) / n, z));
        auto vid = [&](int i, int j) { return base + j * (n + 1) + i; };
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                mesh.faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
                mesh.faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
            }
    };
    add_sheet(+gap / 2.0);
    add_sheet(-gap / 2.0);
    if (generic_rotation) {
        const Eigen::Matrix3d r = (Eigen::AngleAxisd(0.41, Vec3(1, 0, 0).normalized()) *
                                   Eigen::AngleAxisd(0.29, Vec3(0, 1, 0).normalized()) *
                                   Eigen::AngleAxisd(0.17, Vec3(0, 0, 1).normalized()))
                                      .toRotationMatrix();
        for (Vec3& v : mesh.vertices) v = r * v;
    }
    finish(mesh);
    return mesh;
}

TriangleMesh make_blob(int subdivisions, double bump_amplitude) {
    TriangleMesh mesh = make_icosphere(subdivisions, 1.0);
    for (Vec3& v : mesh.vertices) {
        const double x = v.x(), y = v.y(), z = v.z();
        const double bump = 1.0 + bump_amplitude * (0.6 * std::sin(3.0 * x) * std::cos(2.0 * y) +
                                                    0.4 * std::sin(4.0 * z + 1.0) +
                                                    0.3 * std::cos(5.0 * x * y + 0.5));
        v *= bump;
    }
    finish(mesh);
    return mesh;
}

TriangleMesh make_axis_aligned_square(double z_plane) {
    TriangleMesh mesh;
    mesh.vertices = {Vec3(0, 0, z_plane), Vec3(1, 0, z_plane), Vec3(1, 1, z_plane), Vec3(0, 1, z_plane)};
    mesh.faces = {{0, 1, 2}, {0, 2, 3}};
    finish(mesh);
    return mesh;
}

TriangleMesh rotated(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation) {
    TriangleMesh out = mesh;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : mesh.vertices) centroid += v;
    centroid /= std::max(mesh.vertex_count(), 1);
    for (Vec3& v : out.vertices) v = rotation * (v - centroid) + centroid;
    out.material_positions = out.vertices;
    return out;
}

void apply_checkerboard3d(TriangleMesh& mesh, double period) {
    mesh.colors.resize(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& p = mesh.vertices[i];
        Vec3 c;
        for (int axis = 0; axis < 3; ++axis) {
            const long cell = static_cast<long>(std::floor(p[axis] / period + 1e-9));
            c[axis] = (cell % 2 + 2) % 2 == 0 ? 1.0 : 0.0;
        }
        mesh.colors[i] = c;
    }
}

void apply_coordinate_ramp(TriangleMesh& mesh) {
    const Box3 box = mesh.bounding_box();
    const Vec3 extent = (box.hi - box.lo).cwiseMax(1e-12);
    mesh.colors.resize(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        mesh.colors[i] = (mesh.vertices[i] - box.lo).cwiseQuotient(extent);
}

} // namespace gridfem
