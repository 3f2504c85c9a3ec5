#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

#include "sdfkit/collision.hpp"
#include "sdfkit/primitives.hpp"
#include "sdfkit/rng.hpp"
#include "sdfkit/sampling.hpp"

#include <cmath>
#include <numbers>

using namespace sdfkit;

namespace {

std::shared_ptr<const MeshSdfProvider> bunny_oracle() {
    static const auto p = std::make_shared<MeshSdfProvider>(std::make_shared<MeshSdf>(test::bunny_normalized()));
    return p;
}

std::vector<Vec3> near_points(const MeshSdf& sdf, std::size_t n, double margin, std::uint64_t seed) {
    std::vector<Vec3> out;
    for (const auto& s : sample_near_surface(sdf, n, margin, seed)) out.push_back(s.p);
    return out;
}

RigidTransform random_rigid(std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
    return RigidTransform::from_axis_angle(Vec3(g(rng), g(rng), g(rng)), u(rng), Vec3(g(rng), g(rng), g(rng)));
}

}  // namespace

TEST_CASE("detect") {
    const SphereSdf sphere(Vec3::Zero(), 0.9);
    CollisionConfig cfg;
    cfg.epsilon = 0.01;
    const std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(0, 0, 2), Vec3(0.91, 0, 0)};
    const auto r = detect(sphere, pts, cfg);
    CHECK(r.collided[0] == 1);
    CHECK(r.distance[0] == doctest::Approx(-0.9));
    CHECK(r.collided[1] == 0);
    // distance exactly epsilon: strict inequality leaves it alone.
    CHECK(r.distance[2] == 0.91 - 0.9);
    cfg.epsilon = r.distance[2];
    CHECK(detect(sphere, pts, cfg).collided[2] == 0);
}

TEST_CASE("config validation") {
    CollisionConfig cfg;
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.epsilon = 1e-3;
    cfg.max_projection_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    NormalizationTransform norm;
    norm.scale = 11.5338;
    CHECK(CollisionConfig::from_model_units(0.001, norm).epsilon == doctest::Approx(0.0115338));
}

TEST_CASE("resolve on the analytic sphere") {
    const SphereSdf sphere(Vec3::Zero(), 0.9);
    CollisionConfig cfg;
    cfg.epsilon = 1e-12;  // must be positive; effectively zero offset
    const std::vector<Vec3> pts = {Vec3(0.45, 0, 0), Vec3(0, 0, 2), Vec3(0, 0, 0)};
    const auto r = resolve(sphere, pts, cfg);
    CHECK((r.resolved[0] - Vec3(0.9, 0, 0)).norm() < 1e-9);
    CHECK(r.penetration[0] == doctest::Approx(0.45));
    CHECK(r.resolved[1] == pts[1]);
    CHECK(r.collided[1] == 0);
    // The center has no gradient: flagged and left in place.
    CHECK(r.collided[2] == 1);
    CHECK(r.degenerate[2] == 1);
    CHECK(r.resolved[2] == pts[2]);
    CHECK(r.collided_count == 2);

    const Vec3 on_offset(0.95, 0, 0);
    cfg.epsilon = sphere.distance(on_offset);
    const auto s = resolve(sphere, std::vector<Vec3>{on_offset}, cfg);
    CHECK(s.resolved[0] == on_offset);
    CHECK(s.collided[0] == 0);
}

TEST_CASE("one exact projection lands on the offset surface") {
    const auto provider = bunny_oracle();
    const MeshSdf& sdf = provider->sdf();
    CollisionConfig cfg;
    cfg.epsilon = 0.0115338;
    const auto pts = near_points(sdf, 2000, 0.02, 41);
    const auto r = resolve(*provider, pts, cfg);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!r.collided[i]) {
            CHECK(r.resolved[i] == pts[i]);
            continue;
        }
        // Exactness needs the closest feature to stay the same along the move.
        const Vec3 before = sdf.query(pts[i]).hit.point;
        const Vec3 after = sdf.query(r.resolved[i]).hit.point;
        if ((before - after).norm() > 1e-9) continue;
        ++checked;
        CHECK(std::abs(sdf.signed_distance(r.resolved[i]) - cfg.epsilon) < 1e-6);
    }
    MESSAGE(checked << " of " << r.collided_count << " collided points keep their closest feature");
    CHECK(checked > r.collided_count / 2);
}

TEST_CASE("iterations reach the offset from deep inside") {
    const auto provider = bunny_oracle();
    CollisionConfig cfg;
    cfg.epsilon = 0.0115338;
    cfg.max_projection_iters = 3;
    const auto pts = near_points(provider->sdf(), 1000, 0.05, 42);
    const auto r = resolve(*provider, pts, cfg);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) ok += provider->distance(r.resolved[i]) >= cfg.epsilon - 1e-6;
    CHECK(double(ok) >= 0.99 * double(pts.size()));
}

TEST_CASE("batch and pointwise resolution agree") {
    const auto provider = bunny_oracle();
    CollisionConfig cfg;
    cfg.epsilon = 0.0115338;
    cfg.max_projection_iters = 2;
    const auto pts = near_points(provider->sdf(), 300, 0.03, 43);
    const auto batch = resolve(*provider, pts, cfg);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto single = resolve(*provider, std::vector<Vec3>{pts[i]}, cfg);
        CHECK(single.resolved[0] == batch.resolved[i]);
        CHECK(single.collided[0] == batch.collided[i]);
    }
    std::vector<Vec3> in_place = pts;
    CHECK(resolve_in_place(*provider, in_place, cfg) == batch.collided_count);
    CHECK(in_place == batch.resolved);
}

TEST_CASE("rigid transform validation") {
    RigidTransform t;
    t.rotation(0, 0) = 2.0;
    CHECK_THROWS_AS(t.validate(), Error);
    RigidTransform mirror;
    mirror.rotation(0, 0) = -1.0;
    CHECK_THROWS_AS(mirror.validate(), Error);
    CHECK_THROWS_AS(with_transform(std::make_shared<SphereSdf>(Vec3::Zero(), 1.0), mirror), Error);
    CHECK_NOTHROW(random_rigid(1).validate());
}

TEST_CASE("identity and translation wrappers") {
    const auto sphere = std::make_shared<SphereSdf>(Vec3::Zero(), 0.9);
    auto rng = make_rng(44);
    std::uniform_real_distribution<double> u(-2, 2);
    std::vector<Vec3> pts;
    for (int k = 0; k < 100; ++k) pts.emplace_back(u(rng), u(rng), u(rng));

    const auto same = with_transform(sphere, RigidTransform{});
    CHECK(same->distances(pts) == sphere->distances(pts));
    CHECK(same->normals(pts) == sphere->normals(pts));

    const Vec3 t(0.3, -0.2, 1.0);
    const auto moved = with_transform(sphere, RigidTransform{Mat3::Identity(), t});
    for (const auto& p : pts) CHECK(moved->distance(p) == doctest::Approx((p - t).norm() - 0.9).epsilon(1e-12));
}

TEST_CASE("rotated box matches an oracle built on the rotated mesh") {
    const auto box = make_box(Vec3(-0.5, -0.3, -0.2), Vec3(0.5, 0.3, 0.2));
    const auto rot = RigidTransform::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
    const auto wrapped = with_transform(std::make_shared<MeshSdfProvider>(std::make_shared<MeshSdf>(box)), rot);
    const MeshSdf rebuilt(transformed(box, rot));
    auto rng = make_rng(45);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 100; ++k) {
        const Vec3 p(u(rng), u(rng), u(rng));
        CHECK(std::abs(wrapped->distance(p) - rebuilt.signed_distance(p)) < 1e-6);
        CHECK(std::abs(wrapped->distance(p) - oracle::brute_force_signed_distance(transformed(box, rot), p)) < 1e-6);
    }
    const auto ns = wrapped->normals(std::vector<Vec3>{Vec3(0, 0.9, 0)});
    CHECK((ns[0] - Vec3(0, 1, 0)).norm() < 1e-9);
}

TEST_CASE("resolution is rigidly equivariant") {
    const auto provider = bunny_oracle();
    const auto t = random_rigid(46);
    const auto wrapped = with_transform(provider, t);
    CollisionConfig cfg;
    cfg.epsilon = 0.0115338;
    cfg.max_projection_iters = 2;
    const auto pts = near_points(provider->sdf(), 500, 0.03, 47);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(t.apply(p));
    const auto a = resolve(*provider, pts, cfg);
    const auto b = resolve(*wrapped, moved, cfg);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK((b.resolved[i] - t.apply(a.resolved[i])).norm() < 1e-6);
        CHECK(std::abs(wrapped->distance(moved[i]) - provider->distance(pts[i])) < 1e-9);
    }
}

TEST_CASE("provider normals are unit length") {
    const auto provider = bunny_oracle();
    const auto pts = near_points(provider->sdf(), 500, 0.05, 48);
    for (const auto& n : provider->normals(pts)) CHECK(std::abs(n.norm() - 1.0) < 1e-6);

    const auto grid = std::make_shared<VoxelGrid>(build_voxel_sdf(provider->sdf(), 32, false));
    const VoxelSdfProvider voxel(grid);
    for (const auto& n : voxel.normals(pts)) CHECK(std::abs(n.norm() - 1.0) < 1e-6);

    TrainConfig tc;
    tc.hidden_width = 32;
    tc.fourier_count = 16;
    const auto model = std::make_shared<NeuralSdfModel>(init_model(tc));
    const NeuralSdfProvider neural(model);
    for (const auto& n : neural.normals(pts)) CHECK(std::abs(n.norm() - 1.0) < 1e-6);
}

TEST_CASE("float and double neural providers agree") {
    TrainConfig tc;
    tc.hidden_width = 64;
    tc.fourier_count = 32;
    tc.fourier_scale = 1.0;
    const auto model = std::make_shared<NeuralSdfModel>(init_model(tc));
    const NeuralSdfProvider fast(model), exact(model, NeuralSdfProvider::Precision::Double);
    const auto pts = near_points(bunny_oracle()->sdf(), 1000, 0.05, 49);
    const auto df = fast.distances(pts), dd = exact.distances(pts);
    const auto nf = fast.normals(pts), nd = exact.normals(pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(std::abs(df[i] - dd[i]) < 1e-5);
        CHECK(dd[i] == model->forward(pts[i]));
        CHECK((nf[i] - nd[i]).norm() < 1e-4);
    }
}
