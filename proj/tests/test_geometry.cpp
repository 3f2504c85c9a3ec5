#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"

#include "sdfkit/mesh_sdf.hpp"
#include "sdfkit/primitives.hpp"
#include "sdfkit/rng.hpp"

#include <fstream>
#include <random>
#include <set>

using namespace sdfkit;

namespace {

const char* kCubeObj = R"(# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 4 8 7
f 4 7 3
f 1 5 8
f 1 8 4
f 2 3 7
f 2 7 6
)";

void collect_leaves(const Bvh& bvh, std::uint32_t node, std::vector<std::uint32_t>& out) {
    const auto& n = bvh.nodes()[node];
    if (n.is_leaf()) {
        for (std::uint32_t k = 0; k < n.count; ++k) out.push_back(bvh.order()[n.first + k]);
        return;
    }
    collect_leaves(bvh, node + 1, out);
    collect_leaves(bvh, n.first, out);
}

void check_containment(const Bvh& bvh, std::uint32_t node, const TriangleMesh& mesh) {
    const auto& n = bvh.nodes()[node];
    if (n.is_leaf()) {
        CHECK(n.count <= Bvh::kMaxLeafSize);
        for (std::uint32_t k = 0; k < n.count; ++k) {
            const auto t = bvh.order()[n.first + k];
            for (int c = 0; c < 3; ++c) CHECK(n.box.contains(mesh.corner(t, c)));
        }
        return;
    }
    CHECK(n.box.contains(bvh.nodes()[node + 1].box, 1e-12));
    CHECK(n.box.contains(bvh.nodes()[n.first].box, 1e-12));
    check_containment(bvh, node + 1, mesh);
    check_containment(bvh, n.first, mesh);
}

}  // namespace

TEST_CASE("cube obj loads watertight") {
    test::TempDir dir;
    const auto path = dir.write("cube.obj", kCubeObj);
    const auto loaded = load_mesh(path);
    CHECK(loaded.mesh.vertex_count() == 8);
    CHECK(loaded.mesh.triangle_count() == 12);
    CHECK(loaded.watertight);
    CHECK(loaded.dropped_degenerate == 0);
    CHECK(loaded.mesh.signed_volume() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cube with a face removed is open") {
    std::string text = kCubeObj;
    const auto pos = text.find("f 2 7 6\n");
    REQUIRE(pos != std::string::npos);
    text.erase(pos);
    test::TempDir dir;
    const auto loaded = load_mesh(dir.write("open.obj", text));
    CHECK(loaded.mesh.triangle_count() == 11);
    CHECK_FALSE(loaded.watertight);
    CHECK_THROWS_AS(MeshSdf(loaded.mesh), Error);
}

TEST_CASE("obj index zero is a format error with a line number") {
    test::TempDir dir;
    const auto path = dir.write("bad.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
    try {
        load_mesh(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("obj parsing details") {
    test::TempDir dir;
    SUBCASE("negative indices and quads") {
        const auto loaded = load_mesh(dir.write("q.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf -4//1 -3//1 -2//1 -1//1\n"));
        CHECK(loaded.mesh.triangle_count() == 2);
    }
    SUBCASE("degenerate triangles are dropped and counted") {
        const auto loaded = load_mesh(dir.write("d.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n"));
        CHECK(loaded.mesh.triangle_count() == 1);
        CHECK(loaded.dropped_degenerate == 1);
    }
    SUBCASE("empty mesh") { CHECK_THROWS_AS(load_mesh(dir.write("e.obj", "# nothing\n")), Error); }
    SUBCASE("index out of range") { CHECK_THROWS_AS(load_mesh(dir.write("r.obj", "v 0 0 0\nf 1 2 3\n")), FormatError); }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_mesh(dir.path() / "nope.obj"), Error); }
}

TEST_CASE("binary ply round trip through the loader") {
    const auto cube = make_box(Vec3(-1, -1, -1), Vec3(1, 2, 3));
    test::TempDir dir;
    const auto path = dir.path() / "cube.ply";
    test::write_binary_ply(cube, path);
    const auto loaded = load_mesh(path);
    CHECK(loaded.watertight);
    REQUIRE(loaded.mesh.triangle_count() == cube.triangle_count());
    for (std::size_t v = 0; v < cube.vertex_count(); ++v) CHECK((loaded.mesh.vertices[v] - cube.vertices[v]).norm() == 0.0);
}

TEST_CASE("normalize maps the longest axis to [-0.9, 0.9]") {
    const auto cube = make_box(Vec3(0, 0, 0), Vec3(2, 2, 2));
    const auto [mesh, t] = normalize(cube);
    CHECK(t.scale == doctest::Approx(0.9));
    CHECK((t.offset - Vec3(-1, -1, -1)).norm() < 1e-15);
    const Aabb b = mesh.bounds();
    CHECK((b.min - Vec3::Constant(-0.9)).norm() < 1e-12);
    CHECK((b.max - Vec3::Constant(0.9)).norm() < 1e-12);
    for (std::size_t v = 0; v < cube.vertex_count(); ++v) CHECK((t.invert(mesh.vertices[v]) - cube.vertices[v]).norm() < 1e-6);

    SUBCASE("idempotent up to padding") {
        const auto again = normalize(mesh);
        CHECK(again.second.scale >= 0.89);
        CHECK(again.second.scale <= 1.11);
    }
    SUBCASE("aspect preserved") {
        const auto box = make_box(Vec3(0, 0, 0), Vec3(4, 1, 2));
        const auto [m2, t2] = normalize(box);
        const Vec3 e = m2.bounds().extent();
        CHECK(e.x() == doctest::Approx(1.8));
        CHECK(e.y() == doctest::Approx(0.45));
        CHECK(e.z() == doctest::Approx(0.9));
        CHECK(t2.to_model(t2.to_normalized(0.3)) == doctest::Approx(0.3));
    }
    SUBCASE("zero extent") {
        TriangleMesh point;
        point.vertices = {Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)};
        point.triangles = {{0, 1, 2}};
        CHECK_THROWS_AS(normalize(point), Error);
    }
}

TEST_CASE("bvh structure") {
    SUBCASE("single triangle is one leaf") {
        TriangleMesh m;
        m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
        m.triangles = {{0, 1, 2}};
        const Bvh bvh(m);
        REQUIRE(bvh.nodes().size() == 1);
        CHECK(bvh.nodes()[0].is_leaf());
    }
    SUBCASE("cube nodes nest in the root") {
        const auto cube = make_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
        const Bvh bvh(cube);
        for (const auto& n : bvh.nodes()) CHECK(bvh.nodes()[0].box.contains(n.box, 1e-12));
        check_containment(bvh, 0, cube);
    }
    SUBCASE("bunny leaves partition the triangles") {
        const auto bunny = test::bunny_normalized();
        const Bvh bvh(bunny);
        std::vector<std::uint32_t> seen;
        collect_leaves(bvh, 0, seen);
        CHECK(seen.size() == bunny.triangle_count());
        std::sort(seen.begin(), seen.end());
        for (std::size_t k = 0; k < seen.size(); ++k) REQUIRE(seen[k] == k);
        check_containment(bvh, 0, bunny);
    }
}

TEST_CASE("closest point on a triangle") {
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    const auto face = closest_point_on_triangle(Vec3(0.25, 0.25, 1), a, b, c);
    CHECK((face.point - Vec3(0.25, 0.25, 0)).norm() < 1e-15);
    CHECK(face.distance == doctest::Approx(1.0));
    CHECK(face.feature == Feature::Face);
    const auto vert = closest_point_on_triangle(Vec3(2, 0, 0), a, b, c);
    CHECK((vert.point - b).norm() == 0.0);
    CHECK(vert.distance == doctest::Approx(1.0));
    CHECK(vert.feature == Feature::V1);
    const auto edge = closest_point_on_triangle(Vec3(1, 1, 0), a, b, c);
    CHECK((edge.point - Vec3(0.5, 0.5, 0)).norm() < 1e-15);
    CHECK(edge.feature == Feature::E12);

    auto rng = make_rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 2000; ++k) {
        const Vec3 p(u(rng), u(rng), u(rng));
        const Vec3 a2(u(rng), u(rng), u(rng)), b2(u(rng), u(rng), u(rng)), c2(u(rng), u(rng), u(rng));
        const auto hit = closest_point_on_triangle(p, a2, b2, c2);
        CHECK(hit.distance == doctest::Approx(oracle::triangle_distance(p, a2, b2, c2)).epsilon(1e-9));
        CHECK(std::abs((p - hit.point).norm() - hit.distance) < 1e-9);
        CHECK(hit.barycentric.minCoeff() >= -1e-12);
        CHECK(std::abs(hit.barycentric.sum() - 1.0) < 1e-6);
        CHECK((hit.barycentric.x() * a2 + hit.barycentric.y() * b2 + hit.barycentric.z() * c2 - hit.point).norm() < 1e-9);
    }
}

TEST_CASE("bvh closest point equals brute force on the bunny") {
    const auto bunny = test::bunny_normalized();
    const MeshSdf sdf(bunny);
    auto rng = make_rng(11);
    std::uniform_real_distribution<double> u(-1.35, 1.35);
    for (int k = 0; k < 1000; ++k) {
        const Vec3 q(u(rng), u(rng), u(rng));
        const auto hit = sdf.bvh().closest_point(bunny, q);
        REQUIRE(std::abs(hit.distance - oracle::brute_force_distance(bunny, q)) < 1e-9);
        const auto hinted = sdf.bvh().closest_point(bunny, q, std::uint32_t(k % bunny.triangle_count()));
        REQUIRE(hinted.distance == hit.distance);
    }
}

TEST_CASE("signed distance examples") {
    const auto cube = make_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
    const MeshSdf sdf(cube);
    CHECK(sdf.signed_distance(Vec3(0, 0, 0)) == doctest::Approx(-0.5));
    CHECK(sdf.signed_distance(Vec3(1, 0, 0)) == doctest::Approx(0.5));
    CHECK(sdf.signed_distance(Vec3(1, 1, 1)) == doctest::Approx(std::sqrt(0.75)));
    CHECK(sdf.signed_distance(Vec3(0.4, 0.4, 0.4)) == doctest::Approx(-0.1));
    CHECK((sdf.gradient(Vec3(1, 0, 0)) - Vec3(1, 0, 0)).norm() < 1e-12);
    CHECK((sdf.gradient(Vec3(0.3, 0, 0)) - Vec3(1, 0, 0)).norm() < 1e-12);

    const auto sphere = make_icosphere(3, 1.0);
    CHECK(sphere.triangle_count() == 1280);
    CHECK(is_watertight(sphere));
    const MeshSdf ssdf(sphere);
    const Vec3 q(2, 0, 0);
    const double d = ssdf.signed_distance(q);
    CHECK(std::abs(d - 1.0) <= 0.005);
    CHECK(d == doctest::Approx(oracle::brute_force_signed_distance(sphere, q)).epsilon(1e-12));
    CHECK(ssdf.signed_distance(Vec3(0, 0, 0)) < -0.98);
}

TEST_CASE("pseudonormal sign agrees with ray parity") {
    const auto bunny = test::bunny_normalized();
    const MeshSdf sdf(bunny);
    auto rng = make_rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const Vec3 q(u(rng), u(rng), u(rng));
        const double d = sdf.signed_distance(q);
        if (std::abs(d) < 1e-7) continue;
        REQUIRE((d < 0) == oracle::inside_by_parity(bunny, q));
    }
}

TEST_CASE("eikonal property of the exact field") {
    const auto bunny = test::bunny_normalized();
    const MeshSdf sdf(bunny);
    auto rng = make_rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-6;
    int checked = 0;
    while (checked < 100) {
        const Vec3 p(u(rng), u(rng), u(rng));
        const double f = sdf.signed_distance(p);
        if (std::abs(f) < 0.01 || std::abs(f) > 0.1) continue;
        const auto [d0, d1] = oracle::two_nearest(bunny, p);
        if (d1 - d0 <= 1e-3) continue;
        Vec3 g;
        for (int a = 0; a < 3; ++a) {
            Vec3 e = Vec3::Zero();
            e[a] = h;
            g[a] = (sdf.signed_distance(p + e) - sdf.signed_distance(p - e)) / (2 * h);
        }
        CHECK(std::abs(g.norm() - 1.0) < 1e-3);
        CHECK((g.normalized() - sdf.gradient(p)).norm() < 1e-3);
        ++checked;
    }
}

TEST_CASE("mirror symmetry") {
    auto bunny = test::bunny_normalized();
    TriangleMesh mirrored = bunny;
    for (auto& v : mirrored.vertices) v.x() = -v.x();
    for (auto& t : mirrored.triangles) std::swap(t[1], t[2]);
    REQUIRE(is_watertight(mirrored));
    const MeshSdf a(bunny), b(mirrored);
    auto rng = make_rng(14);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int k = 0; k < 500; ++k) {
        const Vec3 p(u(rng), u(rng), u(rng));
        const Vec3 m(-p.x(), p.y(), p.z());
        CHECK(std::abs(a.signed_distance(p) - b.signed_distance(m)) < 1e-9);
    }
}

TEST_CASE("concurrent queries match serial") {
    const auto bunny = test::bunny_normalized();
    const MeshSdf sdf(bunny);
    std::vector<Vec3> qs;
    auto rng = make_rng(15);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int k = 0; k < 4000; ++k) qs.emplace_back(u(rng), u(rng), u(rng));
    std::vector<double> serial(qs.size()), parallel(qs.size());
    for (std::size_t k = 0; k < qs.size(); ++k) serial[k] = sdf.signed_distance(qs[k]);
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t k = t; k < qs.size(); k += 4) parallel[k] = sdf.signed_distance(qs[k]);
        });
    for (auto& th : pool) th.join();
    CHECK(serial == parallel);
}
