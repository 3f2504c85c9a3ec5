#include "sdfkit/mesh_sdf.hpp"

#include <unordered_map>

namespace sdfkit {

namespace {

double corner_angle(const Vec3& at, const Vec3& u, const Vec3& v) {
    const Vec3 a = (u - at).normalized(), b = (v - at).normalized();
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

MeshSdf::MeshSdf(TriangleMesh mesh) : mesh_(std::move(mesh)), bvh_(mesh_) {
    if (!is_watertight(mesh_)) throw Error("signed distance requires a watertight mesh");
    const std::size_t nt = mesh_.triangle_count();
    face_normals_.resize(nt);
    vertex_normals_.assign(mesh_.vertex_count(), Vec3::Zero());
    edge_normals_.resize(nt);

    std::unordered_map<std::uint64_t, Vec3> edge_sum;
    edge_sum.reserve(nt * 3);
    auto edge_key = [](std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        return (std::uint64_t(a) << 32) | b;
    };
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& tri = mesh_.triangles[t];
        const Vec3 a = mesh_.vertices[tri[0]], b = mesh_.vertices[tri[1]], c = mesh_.vertices[tri[2]];
        const Vec3 n = (b - a).cross(c - a).normalized();
        face_normals_[t] = n;
        vertex_normals_[tri[0]] += corner_angle(a, b, c) * n;
        vertex_normals_[tri[1]] += corner_angle(b, c, a) * n;
        vertex_normals_[tri[2]] += corner_angle(c, a, b) * n;
        for (int k = 0; k < 3; ++k) edge_sum.try_emplace(edge_key(tri[k], tri[(k + 1) % 3]), Vec3::Zero()).first->second += n;
    }
    for (auto& n : vertex_normals_) {
        if (n.squaredNorm() > 0.0) n.normalize();
    }
    for (std::size_t t = 0; t < nt; ++t) {
        const auto& tri = mesh_.triangles[t];
        for (int k = 0; k < 3; ++k) edge_normals_[t][k] = edge_sum[edge_key(tri[k], tri[(k + 1) % 3])].normalized();
    }
}

SignedHit MeshSdf::finish(const Vec3& q, const ClosestHit& hit) const {
    SignedHit out;
    out.hit = hit;
    const auto& tri = mesh_.triangles[hit.triangle];
    switch (hit.feature) {
        case Feature::V0: out.pseudonormal = vertex_normals_[tri[0]]; break;
        case Feature::V1: out.pseudonormal = vertex_normals_[tri[1]]; break;
        case Feature::V2: out.pseudonormal = vertex_normals_[tri[2]]; break;
        case Feature::E01: out.pseudonormal = edge_normals_[hit.triangle][0]; break;
        case Feature::E12: out.pseudonormal = edge_normals_[hit.triangle][1]; break;
        case Feature::E20: out.pseudonormal = edge_normals_[hit.triangle][2]; break;
        case Feature::Face: out.pseudonormal = face_normals_[hit.triangle]; break;
    }
    const bool inside = (q - hit.point).dot(out.pseudonormal) < 0.0;
    out.signed_distance = inside ? -hit.distance : hit.distance;
    return out;
}

SignedHit MeshSdf::query(const Vec3& q) const { return finish(q, bvh_.closest_point(mesh_, q)); }

SignedHit MeshSdf::query(const Vec3& q, std::uint32_t hint) const {
    return finish(q, bvh_.closest_point(mesh_, q, hint));
}

Vec3 MeshSdf::gradient(const Vec3& q) const {
    const SignedHit s = query(q);
    // On the surface the offset direction is undefined; the pseudonormal is the limit.
    if (s.hit.distance < 1e-12) return s.pseudonormal;
    const Vec3 dir = (q - s.hit.point) / s.hit.distance;
    return s.signed_distance < 0.0 ? Vec3(-dir) : dir;
}

std::size_t MeshSdf::memory_bytes() const {
    return mesh_.vertices.size() * sizeof(Vec3) + mesh_.triangles.size() * sizeof(Tri) + bvh_.memory_bytes() +
           face_normals_.size() * sizeof(Vec3) + vertex_normals_.size() * sizeof(Vec3) +
           edge_normals_.size() * sizeof(edge_normals_[0]);
}

}  // namespace sdfkit
