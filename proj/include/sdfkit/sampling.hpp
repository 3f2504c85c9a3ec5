#pragma once

#include "sdfkit/mesh_sdf.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace sdfkit {

struct SdfSample {
    Vec3 p = Vec3::Zero();  // normalized units
    double d = 0.0;         // signed distance, normalized units
};

struct SamplingConfig {
    std::uint64_t total = 1'000'000;
    double near_ratio = 0.8;
    double margin = 0.005;  // model units (meters for scanned assets)
    std::uint64_t seed = 1;
    double validation_fraction = 0.05;

    void validate() const;
};

// Box the uniform samples and voxel grids cover: a cube centered on the mesh bounds with
// side `factor` times their longest extent.
Aabb padded_bounds(const TriangleMesh& mesh, double factor = 1.2);

// Area-weighted surface points displaced by an isotropic Gaussian of standard deviation
// `margin` (normalized units), labeled with the exact signed distance.
std::vector<SdfSample> sample_near_surface(const MeshSdf& sdf, std::size_t n, double margin, std::uint64_t seed);

// Points uniform in padded_bounds(mesh), labeled exactly.
std::vector<SdfSample> sample_uniform(const MeshSdf& sdf, std::size_t n, std::uint64_t seed);

// Area-weighted points exactly on the surface (used by the chamfer metric).
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

struct SdfDataset {
    std::vector<SdfSample> train;
    std::vector<SdfSample> validation;
    NormalizationTransform norm;
    SamplingConfig config;
    std::uint64_t near_count = 0;
    std::uint64_t uniform_count = 0;

    std::size_t size() const { return train.size() + validation.size(); }
};

// Near-surface and uniform samples mixed per cfg.near_ratio, shuffled and split
// into train/validation. `sdf` must be built over the normalized mesh.
SdfDataset build_dataset(const MeshSdf& sdf, const NormalizationTransform& norm, const SamplingConfig& cfg);

// Binary dataset file: "SDFD", u32 version, u64 count, 4 x f32 normalization
// (scale, offset xyz), u32 json length + json (config, split), then count x
// (x, y, z, d) f32 little-endian records, training records first.
void save_dataset(const SdfDataset& data, const std::filesystem::path& path);
SdfDataset load_dataset(const std::filesystem::path& path);

}  // namespace sdfkit
