#include "sdfkit/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace sdfkit {

__attribute__((noinline)) Vec3 round_to_float(const Vec3& p) {
    Vec3 out;
    for (int a = 0; a < 3; ++a) {
        const volatile float f = static_cast<float>(p[a]);
        out[a] = double(f);
    }
    return out;
}

Aabb TriangleMesh::bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.expand(v);
    return box;
}

double TriangleMesh::area(std::size_t tri) const {
    const Vec3 a = corner(tri, 0), b = corner(tri, 1), c = corner(tri, 2);
    return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::signed_volume() const {
    double vol = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t)
        vol += corner(t, 0).dot(corner(t, 1).cross(corner(t, 2)));
    return vol / 6.0;
}

bool is_watertight(const TriangleMesh& mesh) {
    if (mesh.triangles.empty()) return false;
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(mesh.triangles.size() * 3);
    auto key = [](std::uint32_t a, std::uint32_t b) { return (std::uint64_t(a) << 32) | b; };
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            if (++directed[key(t[k], t[(k + 1) % 3])] > 1) return false;
        }
    }
    for (const auto& [k, n] : directed) {
        const auto a = std::uint32_t(k >> 32), b = std::uint32_t(k & 0xffffffffu);
        if (!directed.contains(key(b, a))) return false;
    }
    return true;
}

namespace {

std::size_t drop_degenerate(TriangleMesh& mesh) {
    const Aabb box = mesh.bounds();
    const double diag2 = box.empty() ? 0.0 : box.extent().squaredNorm();
    const double min_area = 1e-14 * diag2;
    const std::size_t before = mesh.triangles.size();
    std::erase_if(mesh.triangles, [&](const Tri& t) {
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return true;
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3 n = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
        return 0.5 * n.norm() <= min_area;
    });
    return before - mesh.triangles.size();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view tok, std::size_t line) {
    // std::from_chars for double is available in libstdc++ >= 11
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw FormatError("bad number '" + std::string(tok) + "'", line);
    return v;
}

TriangleMesh read_obj(std::istream& in) {
    TriangleMesh mesh;
    std::string raw;
    std::size_t line = 0;
    std::vector<std::uint32_t> poly;
    while (std::getline(in, raw)) {
        ++line;
        const auto s = trim(raw);
        if (s.empty() || s.front() == '#') continue;
        const auto tok = split_ws(s);
        if (tok[0] == "v") {
            if (tok.size() < 4) throw FormatError("vertex needs 3 coordinates", line);
            mesh.vertices.emplace_back(parse_double(tok[1], line), parse_double(tok[2], line),
                                       parse_double(tok[3], line));
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw FormatError("face needs at least 3 vertices", line);
            poly.clear();
            for (std::size_t k = 1; k < tok.size(); ++k) {
                const auto idx_tok = tok[k].substr(0, tok[k].find('/'));
                long idx = 0;
                const auto res = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
                if (res.ec != std::errc() || res.ptr != idx_tok.data() + idx_tok.size())
                    throw FormatError("bad face index '" + std::string(tok[k]) + "'", line);
                if (idx == 0) throw FormatError("face index 0 is invalid (OBJ indices are 1-based)", line);
                const long n = long(mesh.vertices.size());
                const long resolved = idx > 0 ? idx - 1 : n + idx;
                if (resolved < 0 || resolved >= n)
                    throw FormatError("face index " + std::to_string(idx) + " out of range", line);
                poly.push_back(std::uint32_t(resolved));
            }
            for (std::size_t k = 1; k + 1 < poly.size(); ++k)
                mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
        }
    }
    return mesh;
}

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> props;
};

std::size_t ply_type_size(const std::string& t) {
    static const std::map<std::string, std::size_t> sizes{
        {"char", 1},   {"uchar", 1},  {"int8", 1},    {"uint8", 1},   {"short", 2},  {"ushort", 2},
        {"int16", 2},  {"uint16", 2}, {"int", 4},     {"uint", 4},    {"int32", 4},  {"uint32", 4},
        {"float", 4},  {"float32", 4}, {"double", 8}, {"float64", 8}};
    const auto it = sizes.find(t);
    if (it == sizes.end()) throw FormatError("unsupported PLY type '" + t + "'");
    return it->second;
}

double ply_read_scalar(const std::string& t, const char* p) {
    auto get = [p]<typename T>(T) {
        T v;
        std::memcpy(&v, p, sizeof(T));
        return double(v);
    };
    if (t == "char" || t == "int8") return get(std::int8_t{});
    if (t == "uchar" || t == "uint8") return get(std::uint8_t{});
    if (t == "short" || t == "int16") return get(std::int16_t{});
    if (t == "ushort" || t == "uint16") return get(std::uint16_t{});
    if (t == "int" || t == "int32") return get(std::int32_t{});
    if (t == "uint" || t == "uint32") return get(std::uint32_t{});
    if (t == "float" || t == "float32") return get(float{});
    return get(double{});
}

TriangleMesh read_ply(std::istream& in) {
    std::string raw;
    std::size_t line = 0;
    std::vector<PlyElement> elements;
    bool binary_le = false;
    while (true) {
        if (!std::getline(in, raw)) throw FormatError("PLY header not terminated", line);
        ++line;
        const auto s = trim(raw);
        const auto tok = split_ws(s);
        if (line == 1) {
            if (s != "ply") throw FormatError("missing 'ply' magic", line);
            continue;
        }
        if (tok.empty()) continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format") {
            if (tok.size() < 2 || tok[1] != "binary_little_endian")
                throw FormatError("only binary_little_endian PLY is supported", line);
            binary_le = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) throw FormatError("malformed element line", line);
            elements.push_back({std::string(tok[1]), std::size_t(parse_double(tok[2], line)), {}});
        } else if (tok[0] == "property") {
            if (elements.empty()) throw FormatError("property before element", line);
            PlyProperty prop;
            if (tok.size() == 5 && tok[1] == "list") {
                prop = {std::string(tok[4]), std::string(tok[3]), true, std::string(tok[2])};
            } else if (tok.size() == 3) {
                prop = {std::string(tok[2]), std::string(tok[1]), false, {}};
            } else {
                throw FormatError("malformed property line", line);
            }
            ply_type_size(prop.type);
            elements.back().props.push_back(prop);
        }
    }
    if (!binary_le) throw FormatError("PLY format line missing");

    TriangleMesh mesh;
    std::vector<char> buf(64);
    auto read_bytes = [&](std::size_t n) {
        if (buf.size() < n) buf.resize(n);
        if (!in.read(buf.data(), std::streamsize(n))) throw FormatError("PLY body truncated");
        return buf.data();
    };
    for (const auto& el : elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        if (is_vertex) mesh.vertices.reserve(el.count);
        for (std::size_t i = 0; i < el.count; ++i) {
            Vec3 v = Vec3::Zero();
            for (const auto& prop : el.props) {
                if (prop.is_list) {
                    const auto n = std::size_t(ply_read_scalar(prop.count_type, read_bytes(ply_type_size(prop.count_type))));
                    const std::size_t sz = ply_type_size(prop.type);
                    const char* p = read_bytes(n * sz);
                    if (is_face && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
                        if (n < 3) throw FormatError("PLY face with fewer than 3 vertices");
                        std::vector<std::uint32_t> poly(n);
                        for (std::size_t k = 0; k < n; ++k) {
                            const double idx = ply_read_scalar(prop.type, p + k * sz);
                            if (idx < 0 || idx >= double(mesh.vertices.size()))
                                throw FormatError("PLY face index out of range");
                            poly[k] = std::uint32_t(idx);
                        }
                        for (std::size_t k = 1; k + 1 < n; ++k)
                            mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
                    }
                } else {
                    const double val = ply_read_scalar(prop.type, read_bytes(ply_type_size(prop.type)));
                    if (is_vertex) {
                        if (prop.name == "x") v.x() = val;
                        if (prop.name == "y") v.y() = val;
                        if (prop.name == "z") v.z() = val;
                    }
                }
            }
            if (is_vertex) mesh.vertices.push_back(v);
        }
    }
    return mesh;
}

}  // namespace

LoadedMesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open mesh file " + path.string());
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });

    LoadedMesh out;
    if (ext == ".obj") {
        out.mesh = read_obj(in);
    } else if (ext == ".ply") {
        out.mesh = read_ply(in);
    } else {
        throw FormatError("unsupported mesh extension '" + ext + "' (expected .obj or .ply)");
    }
    if (out.mesh.triangles.empty()) throw Error("mesh " + path.string() + " has no triangles");
    out.dropped_degenerate = drop_degenerate(out.mesh);
    if (out.mesh.triangles.empty()) throw Error("mesh " + path.string() + " has only degenerate triangles");
    out.watertight = is_watertight(out.mesh);
    return out;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[128];
    for (const auto& v : mesh.vertices) {
        const int n = std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        out.write(buf, n);
    }
    for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

std::pair<TriangleMesh, NormalizationTransform> normalize(const TriangleMesh& mesh) {
    if (mesh.vertices.empty()) throw Error("cannot normalize an empty mesh");
    const Aabb box = mesh.bounds();
    const double longest = box.extent().maxCoeff();
    if (!(longest > 0.0)) throw Error("cannot normalize a zero-extent mesh");
    NormalizationTransform t;
    t.offset = -box.center();
    t.scale = 1.8 / longest;
    return {transformed(mesh, t), t};
}

TriangleMesh transformed(const TriangleMesh& mesh, const NormalizationTransform& t) {
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = t.apply(v);
    return out;
}

}  // namespace sdfkit
