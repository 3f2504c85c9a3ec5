#include "sdfkit/collision.hpp"

#include <Eigen/Geometry>

namespace sdfkit {

namespace {

constexpr double kMinGradientNorm = 1e-8;

void check_sizes(std::size_t n, std::size_t m) {
    if (n != m) throw Error("output span size does not match the number of points");
}

}  // namespace

void SdfProvider::distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                                        std::span<Vec3> grad) const {
    distance(points, dist);
    gradient(points, grad);
}

double SdfProvider::distance(const Vec3& p) const {
    double d = 0.0;
    distance({&p, 1}, {&d, 1});
    return d;
}

std::vector<double> SdfProvider::distances(std::span<const Vec3> points) const {
    std::vector<double> out(points.size());
    distance(points, out);
    return out;
}

std::vector<Vec3> SdfProvider::normals(std::span<const Vec3> points) const {
    std::vector<Vec3> out(points.size());
    gradient(points, out);
    for (auto& g : out) {
        const double len = g.norm();
        g = len < kMinGradientNorm ? Vec3::Zero() : Vec3(g / len);
    }
    return out;
}

Vec3 SdfProvider::normal(const Vec3& p) const { return normals({&p, 1})[0]; }

// --- exact oracle ---

void MeshSdfProvider::distance(std::span<const Vec3> points, std::span<double> out) const {
    check_sizes(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = sdf_->signed_distance(points[i]);
}

void MeshSdfProvider::gradient(std::span<const Vec3> points, std::span<Vec3> out) const {
    check_sizes(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = sdf_->gradient(points[i]);
}

void MeshSdfProvider::distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                                            std::span<Vec3> grad) const {
    check_sizes(points.size(), dist.size());
    check_sizes(points.size(), grad.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const SignedHit s = sdf_->query(points[i]);
        dist[i] = s.signed_distance;
        if (s.hit.distance < 1e-12) {
            grad[i] = s.pseudonormal;
        } else {
            const Vec3 dir = (points[i] - s.hit.point) / s.hit.distance;
            grad[i] = s.signed_distance < 0.0 ? Vec3(-dir) : dir;
        }
    }
}

// --- voxel grid ---

void VoxelSdfProvider::distance(std::span<const Vec3> points, std::span<double> out) const {
    check_sizes(points.size(), out.size());
    const Aabb& box = grid_->box();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto q = grid_->query_trilinear(points[i]);
        out[i] = q.clamped ? q.value + std::sqrt(box.squared_distance(points[i])) : q.value;
    }
}

void VoxelSdfProvider::gradient(std::span<const Vec3> points, std::span<Vec3> out) const {
    check_sizes(points.size(), out.size());
    const Aabb& box = grid_->box();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        if (!box.contains(p)) {
            out[i] = (p - p.cwiseMax(box.min).cwiseMin(box.max)).normalized();
        } else {
            out[i] = grid_->gradient(p).gradient;
        }
    }
}

// --- neural ---

void NeuralSdfProvider::distance(std::span<const Vec3> points, std::span<double> out) const {
    check_sizes(points.size(), out.size());
    if (precision_ == Precision::Float) {
        model_->evaluate_f32(points, out, {});
        return;
    }
    const auto v = model_->forward(points);
    std::copy(v.begin(), v.end(), out.begin());
}
void NeuralSdfProvider::gradient(std::span<const Vec3> points, std::span<Vec3> out) const {
    check_sizes(points.size(), out.size());
    std::vector<double> tmp(points.size());
    distance_and_gradient(points, tmp, out);
}
void NeuralSdfProvider::distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                                              std::span<Vec3> grad) const {
    if (precision_ == Precision::Float)
        model_->evaluate_f32(points, dist, grad);
    else
        model_->forward_and_gradient(points, dist, grad);
}

// --- analytic ---

void SphereSdf::distance(std::span<const Vec3> points, std::span<double> out) const {
    check_sizes(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = (points[i] - center_).norm() - radius_;
}

void SphereSdf::gradient(std::span<const Vec3> points, std::span<Vec3> out) const {
    check_sizes(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 r = points[i] - center_;
        const double len = r.norm();
        out[i] = len > 0.0 ? Vec3(r / len) : Vec3::Zero();
    }
}

double BoxSdf::eval(const Vec3& p) const {
    const Vec3 q = (p - center_).cwiseAbs() - half_;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

void BoxSdf::distance(std::span<const Vec3> points, std::span<double> out) const {
    check_sizes(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = eval(points[i]);
}

void BoxSdf::gradient(std::span<const Vec3> points, std::span<Vec3> out) const {
    check_sizes(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 r = points[i] - center_;
        const Vec3 q = r.cwiseAbs() - half_;
        Vec3 g = Vec3::Zero();
        if ((q.array() > 0.0).any()) {
            g = q.cwiseMax(0.0).normalized();
        } else {
            Eigen::Index axis;
            q.maxCoeff(&axis);
            g[axis] = 1.0;
        }
        for (int a = 0; a < 3; ++a)
            if (r[a] < 0.0) g[a] = -g[a];
        out[i] = g;
    }
}

// --- rigid transforms ---

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle, const Vec3& translation) {
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
    t.translation = translation;
    return t;
}

void RigidTransform::validate() const {
    if (!rotation.allFinite() || !translation.allFinite()) throw Error("rigid transform has non-finite entries");
    if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw Error("rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) throw Error("rotation must have determinant +1");
}

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& t) {
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = t.apply(v);
    for (auto& n : out.normals) n = t.rotation * n;
    return out;
}

TransformedSdf::TransformedSdf(SdfProviderPtr inner, const RigidTransform& t) : inner_(std::move(inner)), t_(t) {
    if (!inner_) throw Error("null provider");
    t_.validate();
}

std::vector<Vec3> TransformedSdf::to_local(std::span<const Vec3> points) const {
    std::vector<Vec3> local(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) local[i] = t_.inverse_apply(points[i]);
    return local;
}

void TransformedSdf::distance(std::span<const Vec3> points, std::span<double> out) const {
    inner_->distance(to_local(points), out);
}

void TransformedSdf::gradient(std::span<const Vec3> points, std::span<Vec3> out) const {
    inner_->gradient(to_local(points), out);
    for (auto& g : out) g = t_.rotation * g;
}

void TransformedSdf::distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                                           std::span<Vec3> grad) const {
    inner_->distance_and_gradient(to_local(points), dist, grad);
    for (auto& g : grad) g = t_.rotation * g;
}

SdfProviderPtr with_transform(SdfProviderPtr provider, const RigidTransform& t) {
    return std::make_shared<TransformedSdf>(std::move(provider), t);
}

// --- detection and resolution ---

CollisionConfig CollisionConfig::from_model_units(double epsilon, const NormalizationTransform& norm, int iters) {
    CollisionConfig cfg;
    cfg.epsilon = norm.to_normalized(epsilon);
    cfg.max_projection_iters = iters;
    cfg.validate();
    return cfg;
}

void CollisionConfig::validate() const {
    if (!(epsilon > 0.0)) throw Error("collision epsilon must be positive");
    if (max_projection_iters < 1) throw Error("max_projection_iters must be at least 1");
}

DetectResult detect(const SdfProvider& provider, std::span<const Vec3> points, const CollisionConfig& cfg) {
    cfg.validate();
    DetectResult r;
    r.distance = provider.distances(points);
    r.collided.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) r.collided[i] = r.distance[i] < cfg.epsilon;
    return r;
}

namespace {

// Shared projection loop; `points` is updated in place.
void project(const SdfProvider& provider, std::span<Vec3> points, const CollisionConfig& cfg, ContactResult* report) {
    cfg.validate();
    const std::size_t n = points.size();
    std::vector<double> dist(n);
    provider.distance(points, dist);

    std::vector<std::uint32_t> active;
    for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] < cfg.epsilon) {
            active.push_back(std::uint32_t(i));
            if (report) {
                report->collided[i] = 1;
                report->penetration[i] = cfg.epsilon - dist[i];
            }
        }
    }
    if (report) report->collided_count = active.size();

    std::vector<Vec3> pts, grad;
    std::vector<double> d;
    for (int iter = 0; iter < cfg.max_projection_iters && !active.empty(); ++iter) {
        pts.resize(active.size());
        for (std::size_t k = 0; k < active.size(); ++k) pts[k] = points[active[k]];
        d.resize(active.size());
        grad.resize(active.size());
        provider.distance_and_gradient(pts, d, grad);
        std::size_t kept = 0;
        for (std::size_t k = 0; k < active.size(); ++k) {
            const std::uint32_t i = active[k];
            if (!(d[k] < cfg.epsilon)) continue;
            const double len = grad[k].norm();
            if (!(len >= kMinGradientNorm)) {
                if (report) report->degenerate[i] = 1;
                continue;
            }
            points[i] += (cfg.epsilon - d[k]) * (grad[k] / len);
            active[kept++] = i;
        }
        active.resize(kept);
    }
}

}  // namespace

ContactResult resolve(const SdfProvider& provider, std::span<const Vec3> points, const CollisionConfig& cfg) {
    ContactResult r;
    r.resolved.assign(points.begin(), points.end());
    r.collided.assign(points.size(), 0);
    r.penetration.assign(points.size(), 0.0);
    r.degenerate.assign(points.size(), 0);
    project(provider, r.resolved, cfg, &r);
    return r;
}

std::size_t resolve_in_place(const SdfProvider& provider, std::span<Vec3> points, const CollisionConfig& cfg) {
    ContactResult r;
    r.collided.assign(points.size(), 0);
    r.penetration.assign(points.size(), 0.0);
    r.degenerate.assign(points.size(), 0);
    project(provider, points, cfg, &r);
    return r.collided_count;
}

}  // namespace sdfkit
