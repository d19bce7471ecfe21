#include <doctest.h>

#include "gridfem/fragment.h"
#include "gridfem/synthetic.h"

#include <filesystem>
#include <fstream>
#include <random>

using namespace gridfem;

TEST_CASE("clip: triangle strictly inside the box is returned unchanged") {
    const Box3 box{Vec3(0, 0, 0), Vec3(1, 1, 1)};
    const Vec3 a(0.2, 0.2, 0.5), b(0.8, 0.3, 0.5), c(0.4, 0.7, 0.5);
    const auto poly = clip_triangle_to_voxel(a, b, c, box);
    REQUIRE(poly.has_value());
    REQUIRE(poly->n == 3);
    CHECK((poly->pts[0] - a).norm() == doctest::Approx(0.0));
    CHECK(poly->area() == doctest::Approx(0.5 * ((b - a).cross(c - a)).norm()));
}

TEST_CASE("clip: triangle entirely outside yields nothing") {
    const Box3 box{Vec3(0, 0, 0), Vec3(1, 1, 1)};
    CHECK(!clip_triangle_to_voxel(Vec3(2, 2, 2), Vec3(3, 2, 2), Vec3(2, 3, 2), box));
}

TEST_CASE("clip: diagonal slab quad vs Monte-Carlo containment oracle") {
    // plane x + y = 1 crossing the unit box; big triangle in that plane
    const Box3 box{Vec3(0, 0, 0), Vec3(1, 1, 1)};
    const Vec3 a(1.5, -0.5, -1.0), b(-0.5, 1.5, -1.0), c(0.5, 0.5, 3.0);
    const auto poly = clip_triangle_to_voxel(a, b, c, box);
    REQUIRE(poly.has_value());
    const double shoelace = poly->area();

    // Monte-Carlo: uniform samples on the triangle, fraction inside the box
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double tri_area = 0.5 * ((b - a).cross(c - a)).norm();
    const long n = 1'000'000;
    long inside = 0;
    for (long i = 0; i < n; ++i) {
        double r1 = std::sqrt(unit(rng)), r2 = unit(rng);
        const Vec3 p = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
        if (box.contains(p)) ++inside;
    }
    const double mc_area = tri_area * static_cast<double>(inside) / static_cast<double>(n);
    CHECK(shoelace == doctest::Approx(mc_area).epsilon(0.01));
}

TEST_CASE("corner_support_voxels: interior 8, domain corner 1, face corner 4") {
    const GridLevel level(2); // N = 4
    CHECK(corner_support_voxels(pack_key(2, 2, 2), level).size() == 8);
    CHECK(corner_support_voxels(pack_key(0, 0, 0), level).size() == 1);
    CHECK(corner_support_voxels(pack_key(2, 2, 0), level).size() == 4);
    CHECK(corner_support_voxels(pack_key(2, 0, 0), level).size() == 2);
}

TEST_CASE("forest: single triangle inside one voxel chains through all levels") {
    TriangleMesh mesh;
    mesh.vertices = {Vec3(0.1, 0.1, 0.11), Vec3(0.2, 0.1, 0.11), Vec3(0.1, 0.2, 0.12)};
    mesh.faces = {{0, 1, 2}};
    // the triangle sits inside voxel (0,0,0) at depths 0..2
    const FragmentForest forest = build_fragment_forest(mesh, 2, 0);
    REQUIRE(forest.levels.size() == 3);
    for (const auto& level : forest.levels) CHECK(level.frags.size() == 1);
    CHECK(forest.levels[0].frags[0].parent == -1);
    CHECK(forest.levels[1].frags[0].parent == 0);
    CHECK(forest.levels[2].frags[0].parent == 0);
}

TEST_CASE("forest: depth 0 keeps one fragment per non-degenerate face") {
    const auto [mesh, t] = normalize(make_icosphere(2), 0.05);
    const FragmentForest forest = build_fragment_forest(mesh, 0, 0);
    CHECK(forest.levels[0].frags.size() == static_cast<size_t>(mesh.face_count()));
}

TEST_CASE("forest: area conservation and hierarchical tiling") {
    const auto [mesh, t] = normalize(make_two_sheets(7, 0.04), 0.05);
    const FragmentForest forest = build_fragment_forest(mesh, 4, 0);
    double face_area = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) face_area += mesh.face_area(f);
    for (const auto& level : forest.levels)
        CHECK(level_area(level) == doctest::Approx(face_area).epsilon(1e-6));

    // children tile the parent: per-parent child areas sum to the parent area
    for (size_t l = 1; l < forest.levels.size(); ++l) {
        std::vector<double> child_area(forest.levels[l - 1].frags.size(), 0.0);
        for (const Fragment& f : forest.levels[l].frags) child_area[static_cast<size_t>(f.parent)] += f.area;
        for (size_t p = 0; p < child_area.size(); ++p)
            CHECK(child_area[p] == doctest::Approx(forest.levels[l - 1].frags[p].area).epsilon(1e-9));
    }

    // parent polygon geometrically contains child fragments (vertex test)
    const GridLevel coarse_grid = forest.levels[2].grid();
    for (const Fragment& f : forest.levels[3].frags) {
        const Fragment& parent = forest.levels[2].frags[static_cast<size_t>(f.parent)];
        for (int i = 0; i < f.poly.n; ++i) CHECK(parent.poly.contains(f.poly[i], 1e-9));
    }
    (void)coarse_grid;
}

TEST_CASE("forest: geometry on voxel planes is counted once") {
    // unit square exactly on z = 0.5, which is a voxel plane at every depth >= 1
    const TriangleMesh square = make_axis_aligned_square(0.5);
    TriangleMesh mesh = square;
    // place inside the unit cube without normalize so coordinates stay exact
    for (Vec3& v : mesh.vertices) v = Vec3(0.25, 0.25, 0.0) + 0.5 * v;
    mesh.material_positions = mesh.vertices;
    const FragmentForest forest = build_fragment_forest(mesh, 3, 0);
    double face_area = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) face_area += mesh.face_area(f);
    for (const auto& level : forest.levels)
        CHECK(level_area(level) == doctest::Approx(face_area).epsilon(1e-9));
}

TEST_CASE("forest: deterministic and byte-stable through the cache") {
    const auto [mesh, t] = normalize(make_cube_lattice(2), 0.05);
    const FragmentForest a = build_fragment_forest(mesh, 3, 0);
    const FragmentForest b = build_fragment_forest(mesh, 3, 0);
    const uint64_t h = mesh_hash(mesh);
    const auto pa = (std::filesystem::temp_directory_path() / "gridfem_forest_a.bin").string();
    const auto pb = (std::filesystem::temp_directory_path() / "gridfem_forest_b.bin").string();
    save_forest_cache(a, pa, h, 0.05);
    save_forest_cache(b, pb, h, 0.05);
    std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);

    const auto loaded = load_forest_cache(pa, h, 3, 0, 0.05);
    REQUIRE(loaded.has_value());
    REQUIRE(loaded->levels.size() == a.levels.size());
    for (size_t l = 0; l < a.levels.size(); ++l) REQUIRE(loaded->levels[l].frags.size() == a.levels[l].frags.size());
    CHECK(!load_forest_cache(pa, h + 1, 3, 0, 0.05).has_value()); // key mismatch
}
