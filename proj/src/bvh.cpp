#include "sdfkit/bvh.hpp"

#include <algorithm>

namespace sdfkit {

// Region classification after Ericson, "Real-Time Collision Detection", 5.1.5.
ClosestHit closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    ClosestHit hit;
    auto finish = [&](const Vec3& bary, Feature f) {
        hit.barycentric = bary;
        hit.point = bary[0] * a + bary[1] * b + bary[2] * c;
        hit.distance = (p - hit.point).norm();
        hit.feature = f;
        return hit;
    };
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return finish({1, 0, 0}, Feature::V0);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return finish({0, 1, 0}, Feature::V1);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return finish({1 - v, v, 0}, Feature::E01);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return finish({0, 0, 1}, Feature::V2);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return finish({1 - w, 0, w}, Feature::E20);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish({0, 1 - w, w}, Feature::E12);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return finish({1 - v - w, v, w}, Feature::Face);
}

namespace {
constexpr int kBins = 16;
}

Bvh::Bvh(const TriangleMesh& mesh) {
    if (mesh.triangles.empty()) throw Error("cannot build a BVH over an empty mesh");
    std::vector<BuildItem> items(mesh.triangles.size());
    for (std::uint32_t t = 0; t < items.size(); ++t) {
        Aabb box;
        for (int k = 0; k < 3; ++k) box.expand(mesh.corner(t, k));
        items[t] = {box, box.center(), t};
    }
    nodes_.reserve(2 * items.size() / kMaxLeafSize + 1);
    if (build(items, 0, std::uint32_t(items.size()), 0) != 0) throw Error("BVH root must be node 0");
    order_.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) order_[i] = items[i].tri;
    nodes_.shrink_to_fit();
}

std::uint32_t Bvh::build(std::vector<BuildItem>& items, std::uint32_t begin, std::uint32_t end, int depth) {
    // The query stack holds at most depth + 1 entries.
    if (depth > 120) throw Error("BVH depth limit exceeded");
    const auto index = std::uint32_t(nodes_.size());
    nodes_.emplace_back();
    Aabb box, cbox;
    for (auto i = begin; i < end; ++i) {
        box.expand(items[i].box);
        cbox.expand(items[i].centroid);
    }
    nodes_[index].box = box;
    const std::uint32_t n = end - begin;
    auto make_leaf = [&] {
        nodes_[index].first = begin;
        nodes_[index].count = n;
        return index;
    };
    if (n <= kMaxLeafSize) return make_leaf();

    // Binned SAH over all three axes.
    double best_cost = std::numeric_limits<double>::infinity();
    int best_axis = -1, best_split = 0;
    for (int axis = 0; axis < 3; ++axis) {
        const double lo = cbox.min[axis], ext = cbox.max[axis] - lo;
        if (!(ext > 0.0)) continue;
        std::array<Aabb, kBins> bins;
        std::array<std::uint32_t, kBins> counts{};
        for (auto i = begin; i < end; ++i) {
            const int b = std::min(kBins - 1, int(kBins * (items[i].centroid[axis] - lo) / ext));
            bins[b].expand(items[i].box);
            ++counts[b];
        }
        std::array<double, kBins> right_area{};
        std::array<std::uint32_t, kBins> right_count{};
        Aabb acc;
        std::uint32_t cnt = 0;
        for (int b = kBins - 1; b > 0; --b) {
            acc.expand(bins[b]);
            cnt += counts[b];
            right_area[b] = acc.surface_area();
            right_count[b] = cnt;
        }
        acc = Aabb{};
        cnt = 0;
        for (int b = 0; b < kBins - 1; ++b) {
            acc.expand(bins[b]);
            cnt += counts[b];
            if (cnt == 0 || right_count[b + 1] == 0) continue;
            const double cost = acc.surface_area() * cnt + right_area[b + 1] * right_count[b + 1];
            if (cost < best_cost) {
                best_cost = cost;
                best_axis = axis;
                best_split = b;
            }
        }
    }

    std::uint32_t mid;
    if (best_axis < 0) {
        // All centroids coincide; split by count.
        mid = begin + n / 2;
    } else {
        const double lo = cbox.min[best_axis], ext = cbox.max[best_axis] - lo;
        auto it = std::partition(items.begin() + begin, items.begin() + end, [&](const BuildItem& it) {
            return std::min(kBins - 1, int(kBins * (it.centroid[best_axis] - lo) / ext)) <= best_split;
        });
        mid = std::uint32_t(it - items.begin());
        if (mid == begin || mid == end) mid = begin + n / 2;
    }
    build(items, begin, mid, depth + 1);
    const std::uint32_t right = build(items, mid, end, depth + 1);
    nodes_[index].first = right;
    nodes_[index].count = 0;
    return index;
}

std::size_t Bvh::memory_bytes() const {
    return nodes_.size() * sizeof(Node) + order_.size() * sizeof(std::uint32_t);
}

void Bvh::search(const TriangleMesh& mesh, const Vec3& q, ClosestHit& best, double& best_d2) const {
    std::array<std::uint32_t, 128> stack;
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (node.box.squared_distance(q) >= best_d2) continue;
        if (node.is_leaf()) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                const std::uint32_t t = order_[i];
                ClosestHit h = closest_point_on_triangle(q, mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2));
                const double d2 = (q - h.point).squaredNorm();
                if (d2 < best_d2 || (d2 == best_d2 && t < best.triangle)) {
                    best_d2 = d2;
                    h.triangle = t;
                    best = h;
                }
            }
            continue;
        }
        const std::uint32_t self = std::uint32_t(&node - nodes_.data());
        std::uint32_t near = self + 1, far = node.first;
        double dn = nodes_[near].box.squared_distance(q), df = nodes_[far].box.squared_distance(q);
        if (df < dn) {
            std::swap(near, far);
            std::swap(dn, df);
        }
        // Near child is popped first.
        if (df < best_d2) stack[top++] = far;
        if (dn < best_d2) stack[top++] = near;
    }
}

ClosestHit Bvh::closest_point(const TriangleMesh& mesh, const Vec3& q) const {
    ClosestHit best;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(mesh, q, best, best_d2);
    return best;
}

ClosestHit Bvh::closest_point(const TriangleMesh& mesh, const Vec3& q, std::uint32_t hint) const {
    ClosestHit best = closest_point_on_triangle(q, mesh.corner(hint, 0), mesh.corner(hint, 1), mesh.corner(hint, 2));
    best.triangle = hint;
    // Strictly larger bound so ties with the hint still get visited deterministically.
    double best_d2 = std::nextafter((q - best.point).squaredNorm(), std::numeric_limits<double>::infinity());
    search(mesh, q, best, best_d2);
    return best;
}

}  // namespace sdfkit
