#pragma once

#include "sdfkit/mesh_sdf.hpp"

#include <filesystem>
#include <vector>

namespace sdfkit {

// N^3 lattice of exact signed distances over a box, node (i, j, k) at
// box.min + (i, j, k) * spacing, stored with x fastest and z slowest.
class VoxelGrid {
public:
    VoxelGrid() = default;
    VoxelGrid(int resolution, const Aabb& box, std::vector<float> values, std::vector<float> gradients = {});

    int resolution() const { return n_; }
    const Aabb& box() const { return box_; }
    const Vec3& spacing() const { return h_; }
    double cell_diagonal() const { return h_.norm(); }
    bool has_gradients() const { return !gradients_.empty(); }
    const std::vector<float>& values() const { return values_; }
    const std::vector<float>& gradients() const { return gradients_; }

    std::size_t index(int i, int j, int k) const { return (std::size_t(k) * n_ + std::size_t(j)) * n_ + std::size_t(i); }
    Vec3 node(int i, int j, int k) const { return box_.min + Vec3(i, j, k).cwiseProduct(h_); }
    float value(int i, int j, int k) const { return values_[index(i, j, k)]; }

    // Bytes of the distance array alone, and including the optional gradient array.
    std::size_t value_bytes() const { return values_.size() * sizeof(float); }
    std::size_t payload_bytes() const { return (values_.size() + gradients_.size()) * sizeof(float); }

    struct Query {
        double value = 0.0;
        bool clamped = false;  // p was outside the box and was clamped onto it
    };
    Query query_trilinear(const Vec3& p) const;

    struct GradientQuery {
        Vec3 gradient = Vec3::Zero();
        bool one_sided = false;  // stencil touched the border (or p was outside)
    };
    // Interpolated stored gradient (renormalized) when present, else central
    // differences of query_trilinear with step h.
    GradientQuery gradient(const Vec3& p) const;

private:
    int n_ = 0;
    Aabb box_;
    Vec3 h_ = Vec3::Zero();
    std::vector<float> values_;
    std::vector<float> gradients_;  // 3 floats per node, unit length
};

// Labels every node with the exact oracle. Gradients, when requested, are
// normalized central differences of the value grid (one-sided at borders).
VoxelGrid build_voxel_sdf(const MeshSdf& sdf, const Aabb& box, int resolution, bool with_gradients);
VoxelGrid build_voxel_sdf(const MeshSdf& sdf, int resolution, bool with_gradients);

// "VSDF", u32 version, u32 N, 6 x f32 box, u32 flags (bit 0: gradients), then
// N^3 f32 values (x fastest), then optional N^3 x 3 f32 gradients. Little-endian.
void save_voxel_grid(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid load_voxel_grid(const std::filesystem::path& path);

}  // namespace sdfkit
