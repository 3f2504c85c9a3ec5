#pragma once

#include "sdfkit/bvh.hpp"

#include <memory>

namespace sdfkit {

struct SignedHit {
    ClosestHit hit;
    double signed_distance = 0.0;
    // Angle-weighted pseudonormal of the closest feature (unit length).
    Vec3 pseudonormal = Vec3::UnitZ();
};

// Exact signed distance to a watertight mesh: magnitude from the BVH closest point,
// sign from the angle-weighted pseudonormal of the closest feature (negative inside).
class MeshSdf {
public:
    explicit MeshSdf(TriangleMesh mesh);

    const TriangleMesh& mesh() const { return mesh_; }
    const Bvh& bvh() const { return bvh_; }

    SignedHit query(const Vec3& q) const;
    SignedHit query(const Vec3& q, std::uint32_t hint) const;
    double signed_distance(const Vec3& q) const { return query(q).signed_distance; }
    // Unit gradient of the distance field: away from the closest point, flipped inside.
    Vec3 gradient(const Vec3& q) const;

    std::size_t memory_bytes() const;

private:
    SignedHit finish(const Vec3& q, const ClosestHit& hit) const;

    TriangleMesh mesh_;
    Bvh bvh_;
    std::vector<Vec3> face_normals_;
    std::vector<Vec3> vertex_normals_;
    std::vector<std::array<Vec3, 3>> edge_normals_;  // per triangle, edges (0,1), (1,2), (2,0)
};

}  // namespace sdfkit
