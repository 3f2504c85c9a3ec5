#pragma once

#include "sdfkit/mesh_sdf.hpp"
#include "sdfkit/neural_sdf.hpp"
#include "sdfkit/voxel_sdf.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sdfkit {

// Signed-distance backend. Interior is negative, so gradients point outwards.
// Implementations are immutable and safe to query from several threads.
class SdfProvider {
public:
    virtual ~SdfProvider() = default;

    virtual std::string name() const = 0;
    virtual void distance(std::span<const Vec3> points, std::span<double> out) const = 0;
    // Field gradient, not necessarily unit length; zero where undefined.
    virtual void gradient(std::span<const Vec3> points, std::span<Vec3> out) const = 0;
    virtual void distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                                       std::span<Vec3> grad) const;
    // Bytes held by the representation (mesh + BVH, grid, or parameters).
    virtual std::size_t memory_bytes() const { return 0; }

    double distance(const Vec3& p) const;
    std::vector<double> distances(std::span<const Vec3> points) const;
    // Unit normals; zero vector where the gradient vanishes.
    std::vector<Vec3> normals(std::span<const Vec3> points) const;
    Vec3 normal(const Vec3& p) const;
};

using SdfProviderPtr = std::shared_ptr<const SdfProvider>;

// Exact oracle; normal is the direction from the closest surface point, sign corrected.
class MeshSdfProvider final : public SdfProvider {
public:
    explicit MeshSdfProvider(std::shared_ptr<const MeshSdf> sdf) : sdf_(std::move(sdf)) {}
    std::string name() const override { return "oracle"; }
    using SdfProvider::distance;
    void distance(std::span<const Vec3> points, std::span<double> out) const override;
    void gradient(std::span<const Vec3> points, std::span<Vec3> out) const override;
    void distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                               std::span<Vec3> grad) const override;
    std::size_t memory_bytes() const override { return sdf_->memory_bytes(); }
    const MeshSdf& sdf() const { return *sdf_; }

private:
    std::shared_ptr<const MeshSdf> sdf_;
};

// Trilinear grid. Outside the box the clamped value is extended by the distance to the box.
class VoxelSdfProvider final : public SdfProvider {
public:
    explicit VoxelSdfProvider(std::shared_ptr<const VoxelGrid> grid) : grid_(std::move(grid)) {}
    std::string name() const override { return "voxel:" + std::to_string(grid_->resolution()); }
    using SdfProvider::distance;
    void distance(std::span<const Vec3> points, std::span<double> out) const override;
    void gradient(std::span<const Vec3> points, std::span<Vec3> out) const override;
    std::size_t memory_bytes() const override { return grid_->payload_bytes(); }
    const VoxelGrid& grid() const { return *grid_; }

private:
    std::shared_ptr<const VoxelGrid> grid_;
};

// Evaluates in float32 by default (the parameter precision); Precision::Double
// uses the model's double path.
class NeuralSdfProvider final : public SdfProvider {
public:
    enum class Precision { Float, Double };
    explicit NeuralSdfProvider(std::shared_ptr<const NeuralSdfModel> model, Precision precision = Precision::Float)
        : model_(std::move(model)), precision_(precision) {}
    std::string name() const override { return "neural"; }
    using SdfProvider::distance;
    void distance(std::span<const Vec3> points, std::span<double> out) const override;
    void gradient(std::span<const Vec3> points, std::span<Vec3> out) const override;
    void distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                               std::span<Vec3> grad) const override;
    std::size_t memory_bytes() const override { return model_->parameter_count() * sizeof(float); }
    const NeuralSdfModel& model() const { return *model_; }

private:
    std::shared_ptr<const NeuralSdfModel> model_;
    Precision precision_;
};

// Analytic |p - c| - r.
class SphereSdf final : public SdfProvider {
public:
    SphereSdf(Vec3 center, double radius) : center_(std::move(center)), radius_(radius) {}
    std::string name() const override { return "sphere"; }
    using SdfProvider::distance;
    void distance(std::span<const Vec3> points, std::span<double> out) const override;
    void gradient(std::span<const Vec3> points, std::span<Vec3> out) const override;

private:
    Vec3 center_;
    double radius_;
};

// Analytic axis-aligned box.
class BoxSdf final : public SdfProvider {
public:
    BoxSdf(Vec3 center, Vec3 half_extent) : center_(std::move(center)), half_(std::move(half_extent)) {}
    std::string name() const override { return "box"; }
    using SdfProvider::distance;
    void distance(std::span<const Vec3> points, std::span<double> out) const override;
    void gradient(std::span<const Vec3> points, std::span<Vec3> out) const override;

private:
    double eval(const Vec3& p) const;
    Vec3 center_, half_;
};

// x -> R x + t.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform from_axis_angle(const Vec3& axis, double angle, const Vec3& translation = Vec3::Zero());
    // Throws unless R^T R = I within 1e-9 and det R = +1.
    void validate() const;
    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 inverse_apply(const Vec3& p) const { return rotation.transpose() * (p - translation); }
};

TriangleMesh transformed(const TriangleMesh& mesh, const RigidTransform& t);

// Provider for the object moved by T: distance(T^-1 p), normals rotated by R.
class TransformedSdf final : public SdfProvider {
public:
    TransformedSdf(SdfProviderPtr inner, const RigidTransform& t);
    std::string name() const override { return inner_->name() + "+T"; }
    using SdfProvider::distance;
    void distance(std::span<const Vec3> points, std::span<double> out) const override;
    void gradient(std::span<const Vec3> points, std::span<Vec3> out) const override;
    void distance_and_gradient(std::span<const Vec3> points, std::span<double> dist,
                               std::span<Vec3> grad) const override;
    std::size_t memory_bytes() const override { return inner_->memory_bytes(); }

private:
    std::vector<Vec3> to_local(std::span<const Vec3> points) const;
    SdfProviderPtr inner_;
    RigidTransform t_;
};

SdfProviderPtr with_transform(SdfProviderPtr provider, const RigidTransform& t);

struct CollisionConfig {
    double epsilon = 1e-3;  // normalized units
    int max_projection_iters = 1;

    // Epsilon given in model units (e.g. 0.001 m), converted to the normalized frame.
    static CollisionConfig from_model_units(double epsilon, const NormalizationTransform& norm, int iters = 1);
    void validate() const;
};

struct DetectResult {
    std::vector<std::uint8_t> collided;  // distance < epsilon, strictly
    std::vector<double> distance;
};

DetectResult detect(const SdfProvider& provider, std::span<const Vec3> points, const CollisionConfig& cfg);

struct ContactResult {
    std::vector<std::uint8_t> collided;
    std::vector<Vec3> resolved;       // unchanged for points that did not collide
    std::vector<double> penetration;  // epsilon - f(p) at detection, 0 if not collided
    std::vector<std::uint8_t> degenerate;  // collided but |grad f| < 1e-8: left in place
    std::size_t collided_count = 0;
};

// p <- p + (epsilon - f(p)) * grad f / |grad f| while f(p) < epsilon, at most
// cfg.max_projection_iters times per point.
ContactResult resolve(const SdfProvider& provider, std::span<const Vec3> points, const CollisionConfig& cfg);

// In-place variant for simulators; returns the number of collided points.
std::size_t resolve_in_place(const SdfProvider& provider, std::span<Vec3> points, const CollisionConfig& cfg);

}  // namespace sdfkit
