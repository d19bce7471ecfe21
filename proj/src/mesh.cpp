#include "gridfem/mesh.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

namespace gridfem {

Box3 TriangleMesh::bounding_box() const {
    Box3 box;
    if (vertices.empty()) return box;
    box.lo = box.hi = vertices[0];
    for (const Vec3& v : vertices) {
        box.lo = box.lo.cwiseMin(v);
        box.hi = box.hi.cwiseMax(v);
    }
    return box;
}

double TriangleMesh::face_area(int f) const {
    const auto& tri = faces[f];
    const Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
    const Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * e1.cross(e2).norm();
}

Vec3 TriangleMesh::face_normal(int f) const {
    const auto& tri = faces[f];
    const Vec3 n = (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]);
    const double len = n.norm();
    if (len < 1e-300) return Vec3::Zero();
    return n / len;
}

std::vector<char> TriangleMesh::degenerate_flags() const {
    const Box3 box = bounding_box();
    const double diag2 = (box.hi - box.lo).squaredNorm();
    const double tol = 1e-14 * std::max(diag2, 1e-300);
    std::vector<char> flags(faces.size(), 0);
    int count = 0;
    for (int f = 0; f < face_count(); ++f) {
        if (face_area(f) < tol) {
            flags[f] = 1;
            ++count;
        }
    }
    if (count > 0) warn(std::to_string(count) + " degenerate face(s) excluded from assembly");
    return flags;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
    throw IoError(path + ":" + std::to_string(line) + ": " + what);
}

void validate_face(const std::string& path, int line, const std::array<int, 3>& f, int nverts) {
    for (int c = 0; c < 3; ++c) {
        if (f[c] < 0 || f[c] >= nverts)
            parse_fail(path, line,
                       "face references vertex " + std::to_string(f[c]) + " of a " +
                           std::to_string(nverts) + "-vertex file");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
        parse_fail(path, line, "face has a repeated vertex index");
}

TriangleMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    TriangleMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x() >> p.y() >> p.z())) parse_fail(path, lineno, "malformed vertex record");
            mesh.vertices.push_back(p);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string corner;
            while (ls >> corner) {
                // "i", "i/t", "i//n", "i/t/n"; negative indices are relative to the end
                const size_t slash = corner.find('/');
                const std::string head = corner.substr(0, slash);
                int idx = 0;
                auto res = std::from_chars(head.data(), head.data() + head.size(), idx);
                if (res.ec != std::errc() || res.ptr != head.data() + head.size())
                    parse_fail(path, lineno, "malformed face corner '" + corner + "'");
                if (idx < 0)
                    idx = static_cast<int>(mesh.vertices.size()) + idx;
                else
                    idx -= 1;
                poly.push_back(idx);
            }
            if (poly.size() < 3) parse_fail(path, lineno, "polygon with fewer than 3 vertices");
            for (size_t k = 1; k + 1 < poly.size(); ++k) { // fan-triangulate quads and larger
                std::array<int, 3> tri{poly[0], poly[k], poly[k + 1]};
                validate_face(path, lineno, tri, static_cast<int>(mesh.vertices.size()));
                mesh.faces.push_back(tri);
            }
        }
        // vn/vt and everything else ignored
    }
    return mesh;
}

struct PlyProperty {
    std::string type;
    std::string name;
    std::string count_type; // nonempty for list properties
    std::string item_type;
};

size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32")
        return 4;
    if (t == "double" || t == "float64") return 8;
    throw IoError("unsupported PLY type " + t);
}

double ply_read_binary(std::istream& in, const std::string& t) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(ply_type_size(t)));
    if (!in) throw IoError("truncated PLY body");
    auto as = [&](auto v) {
        std::memcpy(&v, buf, sizeof(v));
        return static_cast<double>(v);
    };
    if (t == "char" || t == "int8") return as(int8_t{});
    if (t == "uchar" || t == "uint8") return as(uint8_t{});
    if (t == "short" || t == "int16") return as(int16_t{});
    if (t == "ushort" || t == "uint16") return as(uint16_t{});
    if (t == "int" || t == "int32") return as(int32_t{});
    if (t == "uint" || t == "uint32") return as(uint32_t{});
    if (t == "float" || t == "float32") return as(float{});
    return as(double{});
}

TriangleMesh load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    int lineno = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) parse_fail(path, lineno, "unexpected end of header");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++lineno;
    };
    next_line();
    if (line != "ply") parse_fail(path, lineno, "missing 'ply' magic");

    enum class Fmt { ASCII, BinaryLE } fmt = Fmt::ASCII;
    struct Element {
        std::string name;
        size_t count = 0;
        std::vector<PlyProperty> props;
    };
    std::vector<Element> elements;
    for (;;) {
        next_line();
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "comment" || tag == "obj_info" || tag.empty()) continue;
        if (tag == "format") {
            std::string f, ver;
            ls >> f >> ver;
            if (f == "ascii")
                fmt = Fmt::ASCII;
            else if (f == "binary_little_endian")
                fmt = Fmt::BinaryLE;
            else
                parse_fail(path, lineno, "unsupported PLY format " + f);
        } else if (tag == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) parse_fail(path, lineno, "property before element");
            PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                ls >> p.count_type >> p.item_type >> p.name;
                p.type = "list";
            } else {
                p.type = t;
                ls >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        } else {
            parse_fail(path, lineno, "unrecognized header line '" + line + "'");
        }
    }

    TriangleMesh mesh;
    auto is_color_name = [](const std::string& n) {
        return n == "red" || n == "green" || n == "blue" || n == "r" || n == "g" || n == "b";
    };
    for (const Element& el : elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        bool any_color = false;
        if (is_vertex)
            for (const auto& p : el.props) any_color |= is_color_name(p.name);

        for (size_t i = 0; i < el.count; ++i) {
            std::istringstream ls;
            if (fmt == Fmt::ASCII) {
                next_line();
                ls.str(line);
            }
            auto read_scalar = [&](const std::string& t) -> double {
                if (fmt == Fmt::BinaryLE) return ply_read_binary(in, t);
                double v;
                if (!(ls >> v)) parse_fail(path, lineno, "malformed " + el.name + " record");
                return v;
            };
            Vec3 pos = Vec3::Zero(), col = Vec3::Zero();
            for (const auto& p : el.props) {
                if (p.type == "list") {
                    const int n = static_cast<int>(read_scalar(p.count_type));
                    std::vector<int> idx(static_cast<size_t>(std::max(n, 0)));
                    for (int k = 0; k < n; ++k) idx[static_cast<size_t>(k)] = static_cast<int>(read_scalar(p.item_type));
                    if (is_face && (p.name == "vertex_indices" || p.name == "vertex_index")) {
                        if (n < 3) parse_fail(path, lineno, "polygon with fewer than 3 vertices");
                        for (int k = 1; k + 1 < n; ++k) {
                            std::array<int, 3> tri{idx[0], idx[static_cast<size_t>(k)], idx[static_cast<size_t>(k) + 1]};
                            validate_face(path, lineno, tri, static_cast<int>(mesh.vertices.size()));
                            mesh.faces.push_back(tri);
                        }
                    }
                } else {
                    double v = read_scalar(p.type);
                    if (is_vertex) {
                        if (p.name == "x") pos.x() = v;
                        else if (p.name == "y") pos.y() = v;
                        else if (p.name == "z") pos.z() = v;
                        else if (p.name == "red" || p.name == "r") col.x() = v;
                        else if (p.name == "green" || p.name == "g") col.y() = v;
                        else if (p.name == "blue" || p.name == "b") col.z() = v;
                        // uchar colors are scaled into [0,1] below
                    }
                }
            }
            if (is_vertex) {
                mesh.vertices.push_back(pos);
                if (any_color) {
                    bool uchar_color = false;
                    for (const auto& p : el.props)
                        if (is_color_name(p.name) && (p.type == "uchar" || p.type == "uint8"))
                            uchar_color = true;
                    mesh.colors.push_back(uchar_color ? Vec3(col / 255.0) : col);
                }
            }
        }
    }
    return mesh;
}

std::string lower_ext(const std::string& path) {
    const size_t dot = path.rfind('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace

TriangleMesh load_mesh(const std::string& path, MeshFormat format) {
    TriangleMesh mesh = (format == MeshFormat::OBJ) ? load_obj(path) : load_ply(path);
    mesh.material_positions = mesh.vertices;
    return mesh;
}

TriangleMesh load_mesh(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") return load_mesh(path, MeshFormat::OBJ);
    if (ext == "ply") return load_mesh(path, MeshFormat::PLY);
    throw IoError("cannot infer mesh format from '" + path + "' (expected .obj or .ply)");
}

void save_mesh(const TriangleMesh& mesh, const std::string& path, MeshFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[256];
    if (format == MeshFormat::OBJ) {
        for (const Vec3& v : mesh.vertices) {
            std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
            out << buf;
        }
        for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    } else {
        out << "ply\nformat ascii 1.0\n";
        out << "element vertex " << mesh.vertices.size() << "\n";
        out << "property double x\nproperty double y\nproperty double z\n";
        if (mesh.has_colors())
            out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
        out << "element face " << mesh.faces.size() << "\n";
        out << "property list uchar int vertex_indices\nend_header\n";
        for (int i = 0; i < mesh.vertex_count(); ++i) {
            const Vec3& v = mesh.vertices[static_cast<size_t>(i)];
            std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", v.x(), v.y(), v.z());
            out << buf;
            if (mesh.has_colors()) {
                const Vec3& c = mesh.colors[static_cast<size_t>(i)];
                for (int k = 0; k < 3; ++k) {
                    int b = static_cast<int>(std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0));
                    out << ' ' << b;
                }
            }
            out << '\n';
        }
        for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

void save_mesh(const TriangleMesh& mesh, const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") return save_mesh(mesh, path, MeshFormat::OBJ);
    if (ext == "ply") return save_mesh(mesh, path, MeshFormat::PLY);
    throw IoError("cannot infer mesh format from '" + path + "'");
}

std::pair<TriangleMesh, NormalizationTransform> normalize(const TriangleMesh& mesh, double pad) {
    if (mesh.vertices.empty()) throw IoError("normalize: empty mesh");
    if (pad < 0.0 || pad >= 0.5) throw IoError("normalize: pad must be in [0, 0.5)");
    const Box3 box = mesh.bounding_box();
    const Vec3 extent = box.hi - box.lo;
    const double diameter = extent.maxCoeff();
    if (diameter <= 0.0) throw IoError("normalize: all vertices coincident (zero diameter)");

    NormalizationTransform t;
    t.scale = (1.0 - 2.0 * pad) / diameter;
    const Vec3 center = 0.5 * (box.lo + box.hi);
    t.translation = Vec3(0.5, 0.5, 0.5) - center * t.scale;

    TriangleMesh out = mesh;
    for (Vec3& v : out.vertices) v = t.apply(v);
    if (out.material_positions.empty()) out.material_positions = mesh.vertices;
    return {out, t};
}

CotanOperator cotan_operator(const TriangleMesh& mesh) {
    const int n = mesh.vertex_count();
    std::vector<Eigen::Triplet<double>> lt, mt;
    const std::vector<char> degen = mesh.degenerate_flags();
    constexpr double kMinAngle = 1e-6; // radians; weights clamped below this
    const double cot_clamp = 1.0 / std::tan(kMinAngle);
    bool clamped = false;

    for (int f = 0; f < mesh.face_count(); ++f) {
        if (degen[static_cast<size_t>(f)]) continue;
        const auto& tri = mesh.faces[static_cast<size_t>(f)];
        const double area = mesh.face_area(f);
        for (int c = 0; c < 3; ++c) {
            const int i = tri[static_cast<size_t>(c)];
            const int j = tri[static_cast<size_t>((c + 1) % 3)];
            const int k = tri[static_cast<size_t>((c + 2) % 3)]; // angle at k faces edge (i,j)
            const Vec3 u = mesh.vertices[static_cast<size_t>(i)] - mesh.vertices[static_cast<size_t>(k)];
            const Vec3 v = mesh.vertices[static_cast<size_t>(j)] - mesh.vertices[static_cast<size_t>(k)];
            double cot = u.dot(v) / std::max(u.cross(v).norm(), 1e-300);
            if (std::abs(cot) > cot_clamp) {
                cot = std::copysign(cot_clamp, cot);
                clamped = true;
            }
            const double w = 0.5 * cot;
            lt.emplace_back(i, j, -w);
            lt.emplace_back(j, i, -w);
            lt.emplace_back(i, i, w);
            lt.emplace_back(j, j, w);

            mt.emplace_back(i, j, area / 12.0);
            mt.emplace_back(j, i, area / 12.0);
        }
        for (int c = 0; c < 3; ++c) mt.emplace_back(tri[static_cast<size_t>(c)], tri[static_cast<size_t>(c)], area / 6.0);
    }
    if (clamped) warn("cotan_operator: near-degenerate triangle, weight clamped");

    CotanOperator op;
    op.L_cot.resize(n, n);
    op.M_cot.resize(n, n);
    op.L_cot.setFromTriplets(lt.begin(), lt.end());
    op.M_cot.setFromTriplets(mt.begin(), mt.end());
    return op;
}

std::vector<std::vector<int>> connected_components(const TriangleMesh& mesh) {
    const int nf = mesh.face_count();
    std::vector<int> parent(static_cast<size_t>(nf));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
            x = parent[static_cast<size_t>(x)];
        }
        return x;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    };

    // faces adjacent iff they share a full (undirected) mesh edge
    std::vector<std::pair<uint64_t, int>> edges;
    edges.reserve(static_cast<size_t>(nf) * 3);
    for (int f = 0; f < nf; ++f) {
        const auto& tri = mesh.faces[static_cast<size_t>(f)];
        for (int c = 0; c < 3; ++c) {
            const uint64_t a = static_cast<uint64_t>(std::min(tri[static_cast<size_t>(c)], tri[static_cast<size_t>((c + 1) % 3)]));
            const uint64_t b = static_cast<uint64_t>(std::max(tri[static_cast<size_t>(c)], tri[static_cast<size_t>((c + 1) % 3)]));
            edges.emplace_back((a << 32) | b, f);
        }
    }
    std::sort(edges.begin(), edges.end());
    for (size_t i = 1; i < edges.size(); ++i)
        if (edges[i].first == edges[i - 1].first) unite(edges[i].second, edges[i - 1].second);

    std::vector<int> root_to_comp(static_cast<size_t>(nf), -1);
    std::vector<std::vector<int>> comps;
    for (int f = 0; f < nf; ++f) {
        const int r = find(f);
        if (root_to_comp[static_cast<size_t>(r)] < 0) {
            root_to_comp[static_cast<size_t>(r)] = static_cast<int>(comps.size());
            comps.emplace_back();
        }
        comps[static_cast<size_t>(root_to_comp[static_cast<size_t>(r)])].push_back(f);
    }
    return comps;
}

std::vector<int> vertex_component_ids(const TriangleMesh& mesh) {
    std::vector<int> ids(static_cast<size_t>(mesh.vertex_count()), -1);
    const auto comps = connected_components(mesh);
    for (size_t c = 0; c < comps.size(); ++c)
        for (int f : comps[c])
            for (int v : mesh.faces[static_cast<size_t>(f)]) ids[static_cast<size_t>(v)] = static_cast<int>(c);
    return ids;
}

uint64_t mesh_hash(const TriangleMesh& mesh) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* data, size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const Vec3& v : mesh.vertices) mix(v.data(), sizeof(double) * 3);
    for (const auto& f : mesh.faces) mix(f.data(), sizeof(int) * 3);
    return h;
}

} // namespace gridfem
