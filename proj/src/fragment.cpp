#include "gridfem/fragment.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace gridfem {

namespace {

constexpr double kMinFragmentArea = 1e-14;

// A polygon lying entirely on a voxel's max-face plane belongs to the +1
// neighbor (where it lies on the min face), unless the voxel is the last one
// along that axis. This keeps planar geometry on voxel planes from being
// counted twice.
bool on_owned_boundary(const ConvexPoly& poly, const Box3& box, const std::array<int, 3>& vox,
                       int resolution) {
    constexpr double tol = 1e-13;
    for (int axis = 0; axis < 3; ++axis) {
        if (vox[static_cast<size_t>(axis)] + 1 >= resolution) continue; // domain boundary: keep
        bool all_on_max = true;
        for (int i = 0; i < poly.n && all_on_max; ++i)
            all_on_max = std::abs(poly[i][axis] - box.hi[axis]) <= tol;
        if (all_on_max) return true;
    }
    return false;
}

void index_level(FragmentLevel& level) {
    std::sort(level.frags.begin(), level.frags.end(), [](const Fragment& a, const Fragment& b) {
        if (a.voxel != b.voxel) return a.voxel < b.voxel;
        return a.face < b.face;
    });
    level.voxel_ranges.clear();
    for (uint32_t i = 0; i < level.frags.size(); ++i) {
        const GridKey v = level.frags[i].voxel;
        auto [it, inserted] = level.voxel_ranges.try_emplace(v, i, i + 1);
        if (!inserted) it->second.second = i + 1;
    }
}

} // namespace

double level_area(const FragmentLevel& level) {
    double a = 0.0;
    for (const Fragment& f : level.frags) a += f.area;
    return a;
}

FragmentForest build_fragment_forest(const TriangleMesh& mesh, int max_depth, int min_depth) {
    if (min_depth < 0 || min_depth > max_depth || max_depth > 10)
        throw IoError("build_fragment_forest: require 0 <= min_depth <= max_depth <= 10");
    const Box3 mesh_box = mesh.bounding_box();
    if (!mesh.vertices.empty() &&
        !(Box3{Vec3::Zero(), Vec3::Ones()}.contains(mesh_box.lo, 1e-9) &&
          Box3{Vec3::Zero(), Vec3::Ones()}.contains(mesh_box.hi, 1e-9)))
        throw IoError("build_fragment_forest: mesh must be normalized into the unit cube");

    FragmentForest forest;
    forest.min_depth = min_depth;
    forest.max_depth = max_depth;
    const std::vector<char> degen = mesh.degenerate_flags();

    // Root level: clip whole triangles against each voxel their bounding box touches.
    {
        FragmentLevel root;
        root.depth = min_depth;
        const GridLevel grid(min_depth);
        const int N = grid.resolution;
        for (int f = 0; f < mesh.face_count(); ++f) {
            if (degen[static_cast<size_t>(f)]) continue;
            const auto& tri = mesh.faces[static_cast<size_t>(f)];
            const Vec3& a = mesh.vertices[static_cast<size_t>(tri[0])];
            const Vec3& b = mesh.vertices[static_cast<size_t>(tri[1])];
            const Vec3& c = mesh.vertices[static_cast<size_t>(tri[2])];
            const Vec3 lo = a.cwiseMin(b).cwiseMin(c);
            const Vec3 hi = a.cwiseMax(b).cwiseMax(c);
            std::array<int, 3> ilo, ihi;
            for (int axis = 0; axis < 3; ++axis) {
                ilo[static_cast<size_t>(axis)] = std::clamp(static_cast<int>(std::floor(lo[axis] * N)), 0, N - 1);
                ihi[static_cast<size_t>(axis)] = std::clamp(static_cast<int>(std::floor(hi[axis] * N)), 0, N - 1);
            }
            for (int k = ilo[2]; k <= ihi[2]; ++k)
                for (int j = ilo[1]; j <= ihi[1]; ++j)
                    for (int i = ilo[0]; i <= ihi[0]; ++i) {
                        const Box3 box = grid.voxel_box(i, j, k);
                        auto clipped = clip_triangle_to_voxel(a, b, c, box);
                        if (!clipped) continue;
                        if (on_owned_boundary(*clipped, box, {i, j, k}, N)) continue;
                        Fragment frag;
                        frag.voxel = pack_key(i, j, k);
                        frag.face = f;
                        frag.parent = -1;
                        frag.poly = *clipped;
                        frag.area = clipped->area();
                        root.frags.push_back(frag);
                    }
        }
        index_level(root);
        forest.levels.push_back(std::move(root));
    }

    // Finer levels: clip parent fragments against their 8 child voxels so
    // hierarchical containment is exact by construction.
    for (int depth = min_depth + 1; depth <= max_depth; ++depth) {
        FragmentLevel fine;
        fine.depth = depth;
        const GridLevel grid(depth);
        const FragmentLevel& coarse = forest.levels.back();
        for (uint32_t pi = 0; pi < coarse.frags.size(); ++pi) {
            const Fragment& parent = coarse.frags[pi];
            const auto pv = unpack_key(parent.voxel);
            for (int s = 0; s < 8; ++s) {
                const int i = 2 * pv[0] + (s & 1);
                const int j = 2 * pv[1] + ((s >> 1) & 1);
                const int k = 2 * pv[2] + ((s >> 2) & 1);
                const Box3 box = grid.voxel_box(i, j, k);
                ConvexPoly clipped = clip_poly_to_box(parent.poly, box);
                if (clipped.n < 3) continue;
                const double area = clipped.area();
                if (area < kMinFragmentArea) continue;
                if (on_owned_boundary(clipped, box, {i, j, k}, grid.resolution)) continue;
                Fragment frag;
                frag.voxel = pack_key(i, j, k);
                frag.face = parent.face;
                frag.parent = static_cast<int32_t>(pi);
                frag.poly = clipped;
                frag.area = area;
                fine.frags.push_back(frag);
            }
        }
        index_level(fine);
        forest.levels.push_back(std::move(fine));
    }
    return forest;
}

namespace {

constexpr uint64_t kCacheMagic = 0x47464643'30303031ull; // "GFFC0001"

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
bool get(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return static_cast<bool>(in);
}

} // namespace

void save_forest_cache(const FragmentForest& forest, const std::string& path, uint64_t mesh_hash,
                       double pad) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write forest cache " + path);
    put(out, kCacheMagic);
    put(out, mesh_hash);
    put(out, static_cast<int32_t>(forest.min_depth));
    put(out, static_cast<int32_t>(forest.max_depth));
    put(out, pad);
    for (const FragmentLevel& level : forest.levels) {
        put(out, static_cast<uint64_t>(level.frags.size()));
        for (const Fragment& f : level.frags) {
            put(out, f.voxel);
            put(out, f.face);
            put(out, f.parent);
            put(out, static_cast<int32_t>(f.poly.n));
            for (int i = 0; i < f.poly.n; ++i) {
                put(out, f.poly[i].x());
                put(out, f.poly[i].y());
                put(out, f.poly[i].z());
            }
        }
    }
    if (!out) throw IoError("write failed for forest cache " + path);
}

std::optional<FragmentForest> load_forest_cache(const std::string& path, uint64_t mesh_hash,
                                                int max_depth, int min_depth, double pad) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    uint64_t magic = 0, hash = 0;
    int32_t lo = 0, hi = 0;
    double p = 0;
    if (!get(in, magic) || !get(in, hash) || !get(in, lo) || !get(in, hi) || !get(in, p))
        return std::nullopt;
    if (magic != kCacheMagic || hash != mesh_hash || lo != min_depth || hi != max_depth || p != pad)
        return std::nullopt;

    FragmentForest forest;
    forest.min_depth = min_depth;
    forest.max_depth = max_depth;
    for (int depth = min_depth; depth <= max_depth; ++depth) {
        FragmentLevel level;
        level.depth = depth;
        uint64_t count = 0;
        if (!get(in, count)) return std::nullopt;
        level.frags.resize(count);
        for (Fragment& f : level.frags) {
            int32_t n = 0;
            if (!get(in, f.voxel) || !get(in, f.face) || !get(in, f.parent) || !get(in, n))
                return std::nullopt;
            if (n < 3 || n > ConvexPoly::kMaxVerts) return std::nullopt;
            f.poly.n = n;
            for (int i = 0; i < n; ++i) {
                double x, y, z;
                if (!get(in, x) || !get(in, y) || !get(in, z)) return std::nullopt;
                f.poly[i] = Vec3(x, y, z);
            }
            f.area = f.poly.area();
        }
        index_level(level); // fragments were saved sorted; re-index is a no-op sort
        forest.levels.push_back(std::move(level));
    }
    return forest;
}

} // namespace gridfem
