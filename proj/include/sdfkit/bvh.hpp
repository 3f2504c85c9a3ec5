#pragma once

#include "sdfkit/mesh.hpp"

#include <vector>

namespace sdfkit {

// Closest-point feature on a triangle: 0..2 vertex, 3..5 edge (k, k+1), 6 face interior.
enum class Feature : std::uint8_t { V0, V1, V2, E01, E12, E20, Face };

struct ClosestHit {
    Vec3 point = Vec3::Zero();
    double distance = std::numeric_limits<double>::infinity();
    std::uint32_t triangle = 0;
    Vec3 barycentric = Vec3::Zero();
    Feature feature = Feature::Face;
};

// Closest point on triangle (a, b, c) to p, with the Voronoi region it lies in.
ClosestHit closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Binned-SAH bounding volume hierarchy over a mesh's triangles, at most
// kMaxLeafSize triangles per leaf. Immutable after construction.
class Bvh {
public:
    static constexpr std::uint32_t kMaxLeafSize = 4;

    struct Node {
        Aabb box;
        std::uint32_t first = 0;  // leaf: first slot in order(); inner: right child index
        std::uint32_t count = 0;  // leaf: number of triangles; inner: 0 (left child is next node)
        bool is_leaf() const { return count > 0; }
    };

    explicit Bvh(const TriangleMesh& mesh);

    const std::vector<Node>& nodes() const { return nodes_; }
    // Triangle indices permuted so every leaf covers a contiguous range.
    const std::vector<std::uint32_t>& order() const { return order_; }
    std::size_t memory_bytes() const;

    ClosestHit closest_point(const TriangleMesh& mesh, const Vec3& q) const;
    // As above, seeded with a triangle known to be near q (tightens the initial bound).
    ClosestHit closest_point(const TriangleMesh& mesh, const Vec3& q, std::uint32_t hint) const;

private:
    struct BuildItem {
        Aabb box;
        Vec3 centroid;
        std::uint32_t tri;
    };
    std::uint32_t build(std::vector<BuildItem>& items, std::uint32_t begin, std::uint32_t end, int depth);
    void search(const TriangleMesh& mesh, const Vec3& q, ClosestHit& best, double& best_d2) const;

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;
};

}  // namespace sdfkit
