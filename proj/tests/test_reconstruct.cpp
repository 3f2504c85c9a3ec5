#include "doctest.h"
#include "test_support.hpp"

#include "sdfkit/collision.hpp"
#include "sdfkit/primitives.hpp"
#include "sdfkit/reconstruct.hpp"
#include "sdfkit/sampling.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace sdfkit;

namespace {

double signed_volume(const TriangleMesh& m) {
    double v = 0.0;
    for (std::size_t t = 0; t < m.triangle_count(); ++t) v += m.corner(t, 0).dot(m.corner(t, 1).cross(m.corner(t, 2))) / 6.0;
    return v;
}

const Aabb kUnitBox{Vec3(-1, -1, -1), Vec3(1, 1, 1)};

}  // namespace

TEST_CASE("case table is consistent") {
    CHECK(marching_cubes_case(0).empty());
    CHECK(marching_cubes_case(255).empty());
    CHECK(marching_cubes_case(1).size() == 1);
    for (int c = 1; c < 255; ++c) {
        CHECK_FALSE(marching_cubes_case(c).empty());
        // Complementary patterns cut the same edges.
        std::set<int> a, b;
        for (const auto& tri : marching_cubes_case(c)) a.insert(tri.begin(), tri.end());
        for (const auto& tri : marching_cubes_case(255 - c)) b.insert(tri.begin(), tri.end());
        CHECK(a == b);
        for (int e : a) {
            const auto ends = marching_cubes_edge(e);
            CHECK(((c >> ends[0]) & 1) != ((c >> ends[1]) & 1));
        }
    }
}

TEST_CASE("field without a sign change gives an empty mesh") {
    const SphereSdf far(Vec3(10, 10, 10), 0.5);
    const auto mesh = marching_cubes(far, 16, kUnitBox);
    CHECK(mesh.triangle_count() == 0);
    CHECK(mesh.vertex_count() == 0);
    CHECK_THROWS_AS(marching_cubes(far, 4, kUnitBox), Error);
}

TEST_CASE("sphere reconstruction") {
    const SphereSdf sphere(Vec3::Zero(), 0.5);
    const auto mesh = marching_cubes(sphere, 64, kUnitBox);
    const double diag = (kUnitBox.extent() / 63.0).norm();
    REQUIRE(mesh.vertex_count() > 0);
    for (const auto& v : mesh.vertices) CHECK(std::abs(v.norm() - 0.5) < diag);
    CHECK(is_watertight(mesh));
    const double vol = signed_volume(mesh);
    CHECK(vol > 0.0);
    CHECK(vol == doctest::Approx(4.0 / 3.0 * std::numbers::pi * 0.125).epsilon(0.02));
}

TEST_CASE("box reconstruction matches the extents") {
    const Vec3 half(0.4, 0.25, 0.6);
    const BoxSdf box(Vec3(0.05, -0.1, 0.0), half);
    const auto mesh = marching_cubes(box, 48, kUnitBox);
    Aabb got;
    for (const auto& v : mesh.vertices) got.expand(v);
    const double cell = (kUnitBox.extent() / 47.0).maxCoeff();
    CHECK((got.min - (Vec3(0.05, -0.1, 0.0) - half)).cwiseAbs().maxCoeff() <= cell);
    CHECK((got.max - (Vec3(0.05, -0.1, 0.0) + half)).cwiseAbs().maxCoeff() <= cell);
    CHECK(is_watertight(mesh));
    CHECK(signed_volume(mesh) > 0.0);
}

TEST_CASE("bunny oracle: watertight, outward, self-accurate") {
    const auto& bunny = test::bunny_normalized();
    const auto sdf = std::make_shared<MeshSdf>(bunny);
    const MeshSdfProvider oracle(sdf);
    AccuracyOptions opts;
    opts.test_points = 2000;
    opts.resolution = 64;
    opts.chamfer_samples = 20000;
    const auto report = evaluate_accuracy(oracle, *sdf, {}, opts);
    CHECK(report.mean_abs_error < 1e-6);
    CHECK(report.max_abs_error < 1e-6);
    REQUIRE(report.chamfer.has_value());
    CHECK(*report.chamfer >= 0.0);
    CHECK(std::isfinite(*report.chamfer));

    const auto coarse = marching_cubes(oracle, 32, padded_bounds(bunny));
    const auto fine = marching_cubes(oracle, 64, padded_bounds(bunny));
    CHECK(is_watertight(fine));
    CHECK(signed_volume(fine) > 0.0);
    const double c32 = chamfer_distance(coarse, bunny, 20000, 3);
    const double c64 = chamfer_distance(fine, bunny, 20000, 3);
    MESSAGE("chamfer at 32: " << c32 << ", at 64: " << c64);
    CHECK(c64 <= 1.1 * c32);
}

TEST_CASE("model-unit conversion of the report") {
    const auto loaded = load_mesh(test::data_path("bunny.obj")).mesh;
    const auto [mesh, norm] = normalize(loaded);
    const auto sdf = std::make_shared<MeshSdf>(mesh);
    const VoxelSdfProvider voxel(std::make_shared<VoxelGrid>(build_voxel_sdf(*sdf, 48, false)));
    AccuracyOptions opts;
    opts.test_points = 1000;
    opts.resolution = 0;
    const auto r = evaluate_accuracy(voxel, *sdf, norm, opts);
    CHECK_FALSE(r.chamfer.has_value());
    CHECK(r.mean_abs_error > 0.0);
    CHECK(r.mean_abs_error_model == doctest::Approx(r.mean_abs_error / norm.scale));
    CHECK(r.max_abs_error >= r.mean_abs_error);
}

TEST_CASE("voxel grid at N=256 stays within the interpolation bound") {
    const auto sdf = std::make_shared<MeshSdf>(test::bunny_normalized());
    const auto grid = std::make_shared<VoxelGrid>(build_voxel_sdf(*sdf, 256, false));
    const VoxelSdfProvider voxel(grid);
    AccuracyOptions opts;
    opts.resolution = 0;
    const auto r = evaluate_accuracy(voxel, *sdf, {}, opts);
    MESSAGE("N=256 mean near-surface error " << r.mean_abs_error << " vs bound " << grid->cell_diagonal());
    CHECK(r.mean_abs_error < grid->cell_diagonal());
}
