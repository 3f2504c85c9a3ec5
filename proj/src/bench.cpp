#include "sdfkit/bench.hpp"

#include "sdfkit/rng.hpp"
#include "sdfkit/voxel_sdf.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <thread>

namespace sdfkit {

namespace {

using Clock = std::chrono::steady_clock;

double run_once(const SdfProvider& provider, std::span<const Vec3> pts, int threads, const CollisionConfig& cfg) {
    const auto start = Clock::now();
    if (threads <= 1 || pts.size() < std::size_t(threads)) {
        const ContactResult r = resolve(provider, pts, cfg);
        (void)r;
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (pts.size() + std::size_t(threads) - 1) / std::size_t(threads);
        for (int t = 0; t < threads; ++t) {
            const std::size_t begin = std::min(pts.size(), std::size_t(t) * chunk);
            const std::size_t end = std::min(pts.size(), begin + chunk);
            pool.emplace_back([&, begin, end] { (void)resolve(provider, pts.subspan(begin, end - begin), cfg); });
        }
        for (auto& th : pool) th.join();
    }
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    if (q == 0.5 && v.size() % 2 == 0) return 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    const auto rank = std::size_t(std::ceil(q * double(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

std::vector<BenchRow> run_bench(const std::vector<BenchTarget>& targets, const BenchOptions& opts) {
    if (opts.repeats < 5) throw Error("benchmark needs at least 5 repetitions per cell");
    opts.collision.validate();
    // One query set per (mesh, count), generated before any timing.
    std::map<std::pair<std::string, std::size_t>, std::vector<Vec3>> queries;
    for (const auto& t : targets) {
        for (const auto count : opts.query_counts) {
            auto& q = queries[{t.mesh, count}];
            if (!q.empty() || count == 0) continue;
            Rng rng = make_rng(opts.seed, std::hash<std::string>{}(t.mesh) ^ count);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            q.reserve(count);
            for (std::size_t i = 0; i < count; ++i)
                q.push_back(t.query_box.min + Vec3(uni(rng), uni(rng), uni(rng)).cwiseProduct(t.query_box.extent()));
        }
    }

    // Rows in target, thread, count order. Within one (thread, count) cell the
    // repetitions run in rounds over all targets, so slow drift in machine speed
    // lands on every backend and mesh alike.
    const std::size_t per_target = opts.threads.size() * opts.query_counts.size();
    std::vector<BenchRow> rows(targets.size() * per_target);
    for (std::size_t ti = 0; ti < opts.threads.size(); ++ti) {
        const int threads = opts.threads[ti];
        for (std::size_t ci = 0; ci < opts.query_counts.size(); ++ci) {
            const auto count = opts.query_counts[ci];
            auto row_of = [&](std::size_t k) -> BenchRow& { return rows[k * per_target + ti * opts.query_counts.size() + ci]; };
            for (std::size_t k = 0; k < targets.size(); ++k) {
                const auto& t = targets[k];
                BenchRow& row = row_of(k);
                row.backend = t.backend;
                row.mesh = t.mesh;
                row.queries = count;
                row.threads = threads;
                row.mem_bytes = t.provider->memory_bytes();
                run_once(*t.provider, queries[{t.mesh, count}], threads, opts.collision);  // warm-up
            }
            for (int r = 0; r < opts.repeats; ++r)
                for (std::size_t k = 0; k < targets.size(); ++k)
                    row_of(k).times_ms.push_back(
                        run_once(*targets[k].provider, queries[{targets[k].mesh, count}], threads, opts.collision));
            for (std::size_t k = 0; k < targets.size(); ++k) {
                BenchRow& row = row_of(k);
                row.median_ms = percentile(row.times_ms, 0.5);
                row.p10_ms = percentile(row.times_ms, 0.1);
                row.p90_ms = percentile(row.times_ms, 0.9);
                row.per_query_ns = count ? row.median_ms * 1e6 / double(count) : 0.0;
            }
        }
    }
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "backend,mesh,queries,threads,median_ms,p10_ms,p90_ms,mem_bytes\n";
    for (const auto& r : rows) {
        out << r.backend << ',' << r.mesh << ',' << r.queries << ',' << r.threads << ',' << r.median_ms << ','
            << r.p10_ms << ',' << r.p90_ms << ',' << r.mem_bytes << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
}

ConstructionReport measure_bvh_construction(const TriangleMesh& mesh) {
    ConstructionReport r;
    r.backend = "bvh";
    const auto start = Clock::now();
    const Bvh bvh(mesh);
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    r.artifact_bytes = bvh.memory_bytes();
    return r;
}

ConstructionReport measure_voxel_construction(const MeshSdf& sdf, int resolution, bool with_gradients) {
    ConstructionReport r;
    r.backend = "voxel:" + std::to_string(resolution);
    const auto start = Clock::now();
    const VoxelGrid grid = build_voxel_sdf(sdf, resolution, with_gradients);
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    r.artifact_bytes = grid.payload_bytes();
    r.oracle_evaluations = std::size_t(resolution) * resolution * resolution;
    return r;
}

ConstructionReport neural_construction(double dataset_seconds, double training_seconds,
                                       const std::filesystem::path& model_file) {
    ConstructionReport r;
    r.backend = "neural";
    r.seconds = dataset_seconds + training_seconds;
    r.artifact_bytes = std::filesystem::file_size(model_file);
    return r;
}

}  // namespace sdfkit
