#include "sdfkit/reconstruct.hpp"

#include <Eigen/Geometry>

#include <unordered_map>

namespace sdfkit {

namespace {

struct CubeTopology {
    std::array<std::array<std::uint8_t, 2>, 12> edges;  // corner pairs, low corner first
    std::array<std::array<std::uint8_t, 4>, 6> faces;   // corners, counter-clockwise seen from outside
    std::array<std::vector<std::array<std::uint8_t, 3>>, 256> cases;

    int edge_between(int a, int b) const {
        for (int e = 0; e < 12; ++e)
            if ((edges[e][0] == a && edges[e][1] == b) || (edges[e][0] == b && edges[e][1] == a)) return e;
        return -1;
    }

    CubeTopology() {
        auto pos = [](int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); };
        int e = 0;
        for (int axis = 0; axis < 3; ++axis)
            for (int c = 0; c < 8; ++c)
                if (!(c & (1 << axis))) edges[e++] = {std::uint8_t(c), std::uint8_t(c | (1 << axis))};

        int f = 0;
        for (int axis = 0; axis < 3; ++axis) {
            for (int side = 0; side < 2; ++side) {
                Vec3 n = Vec3::Zero();
                n[axis] = side ? 1.0 : -1.0;
                const Vec3 u = Vec3::Unit((axis + 1) % 3), v = n.cross(u);
                std::vector<int> corners;
                for (int c = 0; c < 8; ++c)
                    if (((c >> axis) & 1) == side) corners.push_back(c);
                const Vec3 center = Vec3::Constant(0.5);
                std::sort(corners.begin(), corners.end(), [&](int a, int b) {
                    const Vec3 da = pos(a) - center, db = pos(b) - center;
                    return std::atan2(da.dot(v), da.dot(u)) < std::atan2(db.dot(v), db.dot(u));
                });
                for (int k = 0; k < 4; ++k) faces[f][k] = std::uint8_t(corners[k]);
                ++f;
            }
        }

        for (int config = 0; config < 256; ++config) build_case(config);

        // Orient so normals point from inside (corner 0) to outside.
        const auto& t = cases[1].front();
        auto mid = [&](int edge) { return Vec3(0.5 * (pos(edges[edge][0]) + pos(edges[edge][1]))); };
        const Vec3 normal = (mid(t[1]) - mid(t[0])).cross(mid(t[2]) - mid(t[0]));
        if (normal.dot(mid(t[0]) - pos(0)) < 0.0)
            for (auto& tris : cases)
                for (auto& tri : tris) std::swap(tri[1], tri[2]);
    }

    void build_case(int config) {
        auto inside = [config](int c) { return (config >> c) & 1; };
        std::array<int, 12> next;
        next.fill(-1);
        for (const auto& face : faces) {
            std::array<int, 4> edge_of;
            std::array<bool, 4> crossing;
            for (int k = 0; k < 4; ++k) {
                const int a = face[k], b = face[(k + 1) % 4];
                edge_of[k] = edge_between(a, b);
                crossing[k] = inside(a) != inside(b);
            }
            for (int k = 0; k < 4; ++k) {
                if (!crossing[k] || !inside(face[k])) continue;
                // Link this inside-to-outside crossing to the nearest crossing behind it,
                // which cuts the run of inside corners off on its own.
                for (int back = 1; back < 4; ++back) {
                    const int j = (k - back + 4) % 4;
                    if (crossing[j]) {
                        next[edge_of[k]] = edge_of[j];
                        break;
                    }
                }
            }
        }
        std::array<bool, 12> seen{};
        for (int start = 0; start < 12; ++start) {
            if (next[start] < 0 || seen[start]) continue;
            std::vector<int> loop;
            for (int e = start; !seen[e]; e = next[e]) {
                seen[e] = true;
                loop.push_back(e);
            }
            for (std::size_t k = 1; k + 1 < loop.size(); ++k)
                cases[config].push_back({std::uint8_t(loop[0]), std::uint8_t(loop[k]), std::uint8_t(loop[k + 1])});
        }
    }
};

const CubeTopology& topology() {
    static const CubeTopology topo;
    return topo;
}

}  // namespace

const std::vector<std::array<std::uint8_t, 3>>& marching_cubes_case(int case_index) {
    return topology().cases.at(std::size_t(case_index));
}

std::array<std::uint8_t, 2> marching_cubes_edge(int edge) { return topology().edges.at(std::size_t(edge)); }

TriangleMesh marching_cubes(const SdfProvider& provider, int resolution, const Aabb& box, double iso) {
    if (resolution < 8) throw Error("marching cubes resolution must be at least 8");
    const CubeTopology& topo = topology();
    const int n = resolution;
    const Vec3 h = box.extent() / double(n - 1);
    auto node = [&](int i, int j, int k) { return Vec3(box.min + Vec3(i, j, k).cwiseProduct(h)); };

    // Field values slice by slice.
    std::vector<double> values(std::size_t(n) * n * n);
    std::vector<Vec3> slice(std::size_t(n) * n);
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) slice[std::size_t(j) * n + i] = node(i, j, k);
        provider.distance(slice, std::span(values).subspan(std::size_t(k) * n * n, slice.size()));
    }
    auto value = [&](int i, int j, int k) { return values[(std::size_t(k) * n + j) * n + i]; };

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    for (int k = 0; k + 1 < n; ++k) {
        for (int j = 0; j + 1 < n; ++j) {
            for (int i = 0; i + 1 < n; ++i) {
                int config = 0;
                for (int c = 0; c < 8; ++c)
                    if (value(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) < iso) config |= 1 << c;
                const auto& tris = topo.cases[std::size_t(config)];
                if (tris.empty()) continue;
                auto vertex_on = [&](int e) {
                    const int a = topo.edges[e][0], b = topo.edges[e][1];
                    const int ia = i + (a & 1), ja = j + ((a >> 1) & 1), ka = k + ((a >> 2) & 1);
                    const int axis = (a ^ b) == 1 ? 0 : (a ^ b) == 2 ? 1 : 2;
                    const std::uint64_t key = ((std::uint64_t(ka) * n + ja) * n + ia) * 3 + axis;
                    auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) return it->second;
                    const int ib = i + (b & 1), jb = j + ((b >> 1) & 1), kb = k + ((b >> 2) & 1);
                    const double va = value(ia, ja, ka), vb = value(ib, jb, kb);
                    const double t = (iso - va) / (vb - va);
                    mesh.vertices.push_back(node(ia, ja, ka) + t * (node(ib, jb, kb) - node(ia, ja, ka)));
                    const auto idx = std::uint32_t(mesh.vertices.size() - 1);
                    edge_vertex.emplace(key, idx);
                    return idx;
                };
                for (const auto& t : tris) mesh.triangles.push_back({vertex_on(t[0]), vertex_on(t[1]), vertex_on(t[2])});
            }
        }
    }
    return mesh;
}

}  // namespace sdfkit
