#pragma once

#include "sdfkit/collision.hpp"

#include <optional>

namespace sdfkit {

// Marching cubes over a resolution^3 node lattice spanning box. Triangles are
// wound outward for the interior-negative convention; vertices on shared
// lattice edges are shared, so closed level sets give watertight meshes.
TriangleMesh marching_cubes(const SdfProvider& provider, int resolution, const Aabb& box, double iso = 0.0);

// Marching-cubes case table: triangles (as cube-edge triples) for each of the 256 corner sign patterns.
// Corner c sits at (c & 1, c >> 1 & 1, c >> 2 & 1); bit c of the case index is set when corner c is inside.
const std::vector<std::array<std::uint8_t, 3>>& marching_cubes_case(int case_index);
std::array<std::uint8_t, 2> marching_cubes_edge(int edge);

struct ReconReport {
    int resolution = 0;
    std::size_t test_points = 0;
    double mean_abs_error = 0.0;  // normalized units, near-surface held-out points
    double max_abs_error = 0.0;
    double mean_abs_error_model = 0.0;  // model units (mesh file units)
    double max_abs_error_model = 0.0;
    std::optional<double> chamfer;        // normalized; empty when the reconstruction is empty
    std::optional<double> chamfer_model;  // model units
    std::size_t reconstructed_triangles = 0;
};

struct AccuracyOptions {
    std::size_t test_points = 10000;
    double margin = 0.05;  // normalized units
    std::uint64_t seed = 7777;
    int resolution = 128;  // marching cubes lattice for the chamfer metric; 0 skips it
    std::size_t chamfer_samples = 100000;
};

// Compares the provider with the exact oracle on fresh near-surface samples and,
// optionally, the chamfer distance between its reconstruction and the true surface.
ReconReport evaluate_accuracy(const SdfProvider& provider, const MeshSdf& truth, const NormalizationTransform& norm,
                              const AccuracyOptions& opts);

// 0.5 * (mean distance from a's samples to b + mean distance from b's samples to a).
double chamfer_distance(const TriangleMesh& a, const TriangleMesh& b, std::size_t samples, std::uint64_t seed);

}  // namespace sdfkit
