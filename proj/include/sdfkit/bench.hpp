#pragma once

#include "sdfkit/collision.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sdfkit {

struct BenchTarget {
    std::string backend;  // e.g. "oracle", "voxel:128", "neural"
    std::string mesh;     // label of the mesh the backend represents
    SdfProviderPtr provider;
    Aabb query_box;  // queries are drawn uniformly here
};

struct BenchRow {
    std::string backend;
    std::string mesh;
    std::size_t queries = 0;
    int threads = 1;
    std::vector<double> times_ms;  // one per timed repetition, warm-up excluded
    double median_ms = 0.0, p10_ms = 0.0, p90_ms = 0.0;
    double per_query_ns = 0.0;
    std::size_t mem_bytes = 0;
};

struct BenchOptions {
    std::vector<std::size_t> query_counts = {10000, 40000, 100000};
    int repeats = 5;
    std::vector<int> threads = {1};
    std::uint64_t seed = 99;
    CollisionConfig collision;
};

// Times the full contact-point path (distance, normal, one projection step) per
// backend, mesh, query count and thread count. Each mesh gets one query set per
// count, shared by all of its backends.
std::vector<BenchRow> run_bench(const std::vector<BenchTarget>& targets, const BenchOptions& opts);

// Header: backend,mesh,queries,threads,median_ms,p10_ms,p90_ms,mem_bytes
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

struct ConstructionReport {
    std::string backend;
    double seconds = 0.0;
    std::size_t artifact_bytes = 0;
    std::size_t oracle_evaluations = 0;
};

ConstructionReport measure_bvh_construction(const TriangleMesh& mesh);
// Builds (and discards) an N^3 grid; artifact size is the serialized payload.
ConstructionReport measure_voxel_construction(const MeshSdf& sdf, int resolution, bool with_gradients = false);
// Training is timed by train(); this records it together with the model file size.
ConstructionReport neural_construction(double dataset_seconds, double training_seconds,
                                       const std::filesystem::path& model_file);

// Median, and nearest-rank percentile (q in [0, 1]) of a sample.
double percentile(std::vector<double> v, double q);

}  // namespace sdfkit
