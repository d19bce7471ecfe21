#pragma once

#include "gridfem/mesh.h"

namespace gridfem {

/// Procedural meshes for experiments and tests, in world coordinates
/// (callers normalize into the grid domain).

TriangleMesh make_single_triangle();

/// Closed axis-aligned cube shell (12 triangles, outward orientation).
TriangleMesh make_cube(const Vec3& min_corner, double size);

/// n x n x n disjoint cube shells of unit size spaced `gap` apart
/// (pitch = 1 + gap). gap defaults to the cube size, matching an
/// equidistantly-spaced lattice. segments subdivides each face into a
/// welded segments x segments grid.
TriangleMesh make_cube_lattice(int n, double gap = 1.0, int segments = 1);

/// Icosphere: subdivided icosahedron projected to radius r.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Two spherical caps split at the equator with an axial gap between them;
/// near-touching for small gap. Built from a UV sphere so that no triangle
/// crosses the split.
TriangleMesh make_two_hemispheres(int rings, int segments, double radius = 1.0, double gap = 0.02);

/// Two parallel n x n square sheets, separation `gap`, rotated by a fixed
/// generic rotation so that no face ends up axis-aligned (axis-aligned
/// planar geometry makes the grid systems rank-deficient).
TriangleMesh make_two_sheets(int n, double gap = 0.05, bool generic_rotation = true);

/// Genus-0 blobby shape: icosphere with smooth deterministic radial bumps.
TriangleMesh make_blob(int subdivisions, double bump_amplitude = 0.35);

/// Axis-aligned unit square in the plane z = z_plane (2 triangles). The
/// singular test case of the grid systems.
TriangleMesh make_axis_aligned_square(double z_plane = 0.0);

/// Applies a rotation about the mesh centroid.
TriangleMesh rotated(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation);

/// Synthetic per-vertex textures evaluated on current vertex positions.
/// checkerboard3d: RGB is 0/1 per axis parity of floor(p/period).
void apply_checkerboard3d(TriangleMesh& mesh, double period);
/// Coordinate ramps scaled into [0,1] per channel over the bounding box.
void apply_coordinate_ramp(TriangleMesh& mesh);

} // namespace gridfem
