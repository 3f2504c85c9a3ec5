#pragma once

#include "sdfkit/types.hpp"

#include <filesystem>
#include <vector>

namespace sdfkit {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Tri> triangles;
    std::vector<Vec3> normals;  // optional per-vertex normals, empty if absent

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    Aabb bounds() const;
    Vec3 corner(std::size_t tri, int k) const { return vertices[triangles[tri][k]]; }
    double area(std::size_t tri) const;
    // Enclosed volume from the divergence theorem; positive for outward orientation.
    double signed_volume() const;
};

// True iff every directed edge appears exactly once and its reverse exactly once,
// i.e. every edge is shared by two consistently wound triangles.
bool is_watertight(const TriangleMesh& mesh);

struct LoadedMesh {
    TriangleMesh mesh;
    std::size_t dropped_degenerate = 0;
    bool watertight = false;
};

// Reads Wavefront OBJ (positions and faces; polygons are fan-triangulated) or
// binary little-endian PLY. Zero-area triangles are dropped and counted.
LoadedMesh load_mesh(const std::filesystem::path& path);

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

// Maps model units to the normalized frame: normalized = (model + offset) * scale.
struct NormalizationTransform {
    double scale = 1.0;
    Vec3 offset = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return (p + offset) * scale; }
    Vec3 invert(const Vec3& q) const { return q / scale - offset; }
    // Lengths: normalized units per model unit.
    double to_normalized(double len) const { return len * scale; }
    double to_model(double len) const { return len / scale; }
};

// Uniformly scales the mesh so its longest axis spans [-0.9, 0.9], centered at the origin.
std::pair<TriangleMesh, NormalizationTransform> normalize(const TriangleMesh& mesh);

TriangleMesh transformed(const TriangleMesh& mesh, const NormalizationTransform& t);

}  // namespace sdfkit
