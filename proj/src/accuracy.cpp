#include "sdfkit/reconstruct.hpp"

#include "sdfkit/sampling.hpp"

namespace sdfkit {

namespace {

TriangleMesh without_degenerate(const TriangleMesh& mesh) {
    TriangleMesh out = mesh;
    std::erase_if(out.triangles, [&](const Tri& t) {
        const Vec3& a = out.vertices[t[0]];
        return (out.vertices[t[1]] - a).cross(out.vertices[t[2]] - a).squaredNorm() <= 0.0;
    });
    return out;
}

double mean_distance_to(const std::vector<Vec3>& points, const TriangleMesh& mesh, const Bvh& bvh) {
    if (points.empty()) return 0.0;
    double total = 0.0;
    for (const auto& p : points) total += bvh.closest_point(mesh, p).distance;
    return total / double(points.size());
}

}  // namespace

double chamfer_distance(const TriangleMesh& a_in, const TriangleMesh& b_in, std::size_t samples, std::uint64_t seed) {
    const TriangleMesh a = without_degenerate(a_in), b = without_degenerate(b_in);
    if (a.triangles.empty() || b.triangles.empty()) throw Error("chamfer distance needs two nonempty meshes");
    const Bvh bvh_a(a), bvh_b(b);
    const auto pa = sample_surface(a, samples, seed);
    const auto pb = sample_surface(b, samples, seed + 1);
    return 0.5 * (mean_distance_to(pa, b, bvh_b) + mean_distance_to(pb, a, bvh_a));
}

ReconReport evaluate_accuracy(const SdfProvider& provider, const MeshSdf& truth, const NormalizationTransform& norm,
                              const AccuracyOptions& opts) {
    ReconReport r;
    r.resolution = opts.resolution;
    const auto samples = sample_near_surface(truth, opts.test_points, opts.margin, opts.seed);
    r.test_points = samples.size();
    std::vector<Vec3> pts;
    pts.reserve(samples.size());
    for (const auto& s : samples) pts.push_back(s.p);
    const auto pred = provider.distances(pts);
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double e = std::abs(pred[i] - samples[i].d);
        sum += e;
        r.max_abs_error = std::max(r.max_abs_error, e);
    }
    r.mean_abs_error = samples.empty() ? 0.0 : sum / double(samples.size());
    r.mean_abs_error_model = norm.to_model(r.mean_abs_error);
    r.max_abs_error_model = norm.to_model(r.max_abs_error);

    if (opts.resolution > 0) {
        const TriangleMesh recon = marching_cubes(provider, opts.resolution, padded_bounds(truth.mesh()));
        r.reconstructed_triangles = recon.triangle_count();
        if (!recon.triangles.empty()) {
            r.chamfer = chamfer_distance(recon, truth.mesh(), opts.chamfer_samples, opts.seed + 17);
            r.chamfer_model = norm.to_model(*r.chamfer);
        }
    }
    return r;
}

}  // namespace sdfkit
