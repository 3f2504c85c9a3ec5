#include "doctest.h"
#include "test_support.hpp"

#include "sdfkit/neural_sdf.hpp"
#include "sdfkit/rng.hpp"

#include <cmath>
#include <numbers>

using namespace sdfkit;

namespace {

// Analytic sphere of radius 0.9: points within a thin shell, plus a uniform share in [-box, box]^3.
SdfDataset sphere_dataset(std::size_t n, std::uint64_t seed, double box = 2.2, double uniform_fraction = 0.2) {
    auto rng = make_rng(seed, 77);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-box, box);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    SdfDataset data;
    std::vector<SdfSample> all;
    for (std::size_t k = 0; k < n; ++k) {
        Vec3 p;
        if (coin(rng) >= uniform_fraction) {
            const Vec3 dir = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
            p = dir * (0.9 + 0.05 * gauss(rng));
        } else {
            p = Vec3(uni(rng), uni(rng), uni(rng));
        }
        p = round_to_float(p);
        all.push_back({p, p.norm() - 0.9});
    }
    const std::size_t n_val = n / 20;
    data.validation.assign(all.end() - std::ptrdiff_t(n_val), all.end());
    all.resize(n - n_val);
    data.train = std::move(all);
    return data;
}

NeuralSdfModel small_model(int m, double sigma, std::uint64_t seed = 3) {
    TrainConfig cfg;
    cfg.fourier_count = m;
    cfg.fourier_scale = sigma;
    cfg.hidden_width = 32;
    cfg.layer_count = 3;
    cfg.seed = seed;
    return init_model(cfg);
}

bool same_parameters(const NeuralSdfModel& a, const NeuralSdfModel& b) {
    if (a.fourier() != b.fourier() || a.layers().size() != b.layers().size()) return false;
    for (std::size_t l = 0; l < a.layers().size(); ++l)
        if (a.layers()[l].weights != b.layers()[l].weights || a.layers()[l].bias != b.layers()[l].bias) return false;
    return true;
}

}  // namespace

TEST_CASE("default architecture size") {
    const auto model = init_model(TrainConfig{});
    CHECK(model.input_width() == 256);
    CHECK(model.layers().size() == 4);
    CHECK(model.parameter_count() == 256 * 256 * 3 + 256 * 3 + 257);
    test::TempDir dir;
    save_model(model, dir.path() / "m.nsdf");
    const double mb = double(test::file_size(dir.path() / "m.nsdf")) / 1e6;
    CHECK(mb == doctest::Approx(0.79).epsilon(0.02));
}

TEST_CASE("eight-layer model file lands between 1.5 and 3 MB") {
    TrainConfig cfg;
    cfg.layer_count = 8;
    test::TempDir dir;
    save_model(init_model(cfg), dir.path() / "m8.nsdf");
    const double mb = double(test::file_size(dir.path() / "m8.nsdf")) / 1e6;
    CHECK(mb >= 1.5);
    CHECK(mb <= 3.0);
}

TEST_CASE("initialization") {
    CHECK(same_parameters(small_model(16, 1.0, 5), small_model(16, 1.0, 5)));
    CHECK_FALSE(same_parameters(small_model(16, 1.0, 5), small_model(16, 1.0, 6)));
    TrainConfig bad;
    bad.hidden_width = 0;
    CHECK_THROWS_AS(init_model(bad), Error);

    SUBCASE("sigma zero gives constant features and a constant model") {
        const auto model = small_model(8, 0.0);
        CHECK(model.fourier().isZero());
        const double a = model.forward(Vec3(0.1, -0.3, 0.7));
        CHECK(model.forward(Vec3(-0.9, 0.4, 0.2)) == a);
        const auto g = model.input_gradient(std::vector<Vec3>{Vec3(0.3, 0.3, 0.3)});
        CHECK(g[0].norm() == 0.0);
    }
}

TEST_CASE("fourier feature examples") {
    const Eigen::MatrixXf b = small_model(16, 2.0).fourier();
    const Eigen::VectorXd at_origin = fourier_features(Vec3::Zero(), b);
    REQUIRE(at_origin.size() == 32);
    CHECK(at_origin.head(16).isOnes());
    CHECK(at_origin.tail(16).isZero());

    Eigen::MatrixXf row(1, 3);
    row << 1, 0, 0;
    const Eigen::VectorXd q = fourier_features(Vec3(0.25, 0, 0), row);
    CHECK(std::abs(q[0]) < 1e-15);
    CHECK(q[1] == doctest::Approx(1.0));

    const Eigen::VectorXd r = fourier_features(Vec3(0.3, -1.7, 0.9), b);
    CHECK(r.head(16).norm() <= std::sqrt(16.0) + 1e-12);
    CHECK(r.tail(16).norm() <= std::sqrt(16.0) + 1e-12);
}

TEST_CASE("hand-built affine model") {
    DenseLayer layer{Eigen::MatrixXf(1, 3), Eigen::VectorXf(1)};
    layer.weights << 0.5f, -2.0f, 0.25f;
    layer.bias << 1.5f;
    const NeuralSdfModel model(Eigen::MatrixXf(0, 3), {layer});
    CHECK(model.input_width() == 3);
    const Vec3 p(0.2, 0.4, -0.8);
    CHECK(model.forward(p) == 0.5 * 0.2 - 2.0 * 0.4 + 0.25 * -0.8 + 1.5);
    const auto g = model.input_gradient(std::vector<Vec3>{p, Vec3(5, 5, 5)});
    CHECK(g[0] == Vec3(0.5, -2.0, 0.25));
    CHECK(g[1] == Vec3(0.5, -2.0, 0.25));

    CHECK_THROWS_AS(NeuralSdfModel(Eigen::MatrixXf(0, 3), {}), Error);
    DenseLayer wide{Eigen::MatrixXf::Zero(2, 3), Eigen::VectorXf::Zero(2)};
    CHECK_THROWS_AS(NeuralSdfModel(Eigen::MatrixXf(0, 3), {wide}), Error);
}

TEST_CASE("batch and pointwise evaluation agree") {
    const auto model = small_model(32, 1.0);
    std::vector<Vec3> pts;
    auto rng = make_rng(4);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 5000; ++k) pts.emplace_back(u(rng), u(rng), u(rng));
    pts.push_back(pts.front());
    const auto batch = model.forward(pts);
    std::vector<double> values(pts.size());
    std::vector<Vec3> grads(pts.size());
    model.forward_and_gradient(pts, values, grads);
    const auto grad_only = model.input_gradient(pts);
    CHECK(batch.front() == batch.back());
    for (std::size_t k = 0; k < pts.size(); k += 97) {
        CHECK(model.forward(pts[k]) == batch[k]);
        CHECK(values[k] == batch[k]);
        CHECK(grads[k] == grad_only[k]);
    }
    for (double v : batch) REQUIRE(std::isfinite(v));
}

TEST_CASE("input gradient matches central differences where the model is smooth") {
    for (int m : {0, 32}) {
        const auto model = small_model(m, 1.0);
        auto rng = make_rng(8);
        std::uniform_real_distribution<double> u(-1, 1);
        const double h = 1e-4;
        int checked = 0;
        while (checked < 200) {
            const Vec3 p(u(rng), u(rng), u(rng));
            const auto pattern = model.activation_pattern(p);
            bool smooth = true;
            Vec3 fd;
            for (int a = 0; a < 3 && smooth; ++a) {
                Vec3 e = Vec3::Zero();
                e[a] = h;
                smooth = model.activation_pattern(p + e) == pattern && model.activation_pattern(p - e) == pattern;
                fd[a] = (model.forward(p + e) - model.forward(p - e)) / (2 * h);
            }
            if (!smooth) continue;
            const Vec3 g = model.input_gradient(std::vector<Vec3>{p})[0];
            CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
            ++checked;
        }
    }
}

TEST_CASE("save and load reproduce outputs exactly") {
    auto model = small_model(16, 2.0);
    model.set_norm({2.5, Vec3(0.1, -0.2, 0.3)});
    test::TempDir dir;
    const auto path = dir.path() / "m.nsdf";
    save_model(model, path);
    const auto loaded = load_model(path);
    CHECK(same_parameters(model, loaded));
    CHECK(loaded.norm().scale == 2.5);
    CHECK(loaded.norm().offset == Vec3(0.1, -0.2, 0.3));
    CHECK(loaded.config().hidden_width == 32);
    std::vector<Vec3> pts;
    auto rng = make_rng(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 1000; ++k) pts.emplace_back(u(rng), u(rng), u(rng));
    CHECK(model.forward(pts) == loaded.forward(pts));
    CHECK(model.input_gradient(pts) == loaded.input_gradient(pts));

    SUBCASE("truncated file") {
        std::filesystem::resize_file(path, test::file_size(path) - 100);
        CHECK_THROWS_AS(load_model(path), FormatError);
        std::filesystem::resize_file(path, 10);
        CHECK_THROWS_AS(load_model(path), FormatError);
    }
    SUBCASE("wrong magic") { CHECK_THROWS_AS(load_model(dir.write("x.nsdf", "VSDF0000")), FormatError); }
}

TEST_CASE("zero epochs leave the model untouched") {
    auto model = small_model(16, 1.0);
    const auto before = model;
    TrainConfig cfg = model.config();
    cfg.epochs = 0;
    const auto data = sphere_dataset(2000, 1);
    const auto hist = train(model, data, cfg);
    CHECK(same_parameters(model, before));
    CHECK(hist.train_loss.empty());
    SdfDataset empty;
    CHECK_THROWS_AS(train(model, empty, cfg), Error);
}

TEST_CASE("training is deterministic and reduces the loss") {
    const auto data = sphere_dataset(8000, 2);
    auto cfg = small_model(16, 0.5).config();
    cfg.epochs = 3;
    cfg.batch_size = 256;
    auto a = init_model(cfg), b = init_model(cfg);
    const auto ha = train(a, data, cfg);
    const auto hb = train(b, data, cfg);
    CHECK(ha.train_loss == hb.train_loss);
    CHECK(ha.validation_loss == hb.validation_loss);
    CHECK(same_parameters(a, b));
    CHECK(ha.validation_loss.back() < ha.initial_validation_loss);
}

TEST_CASE("divergent training aborts with a diagnostic") {
    const auto data = sphere_dataset(4000, 3);
    auto cfg = small_model(16, 0.5).config();
    cfg.epochs = 5;
    cfg.learning_rate = 1e30;
    auto model = init_model(cfg);
    CHECK_THROWS_WITH_AS(train(model, data, cfg), doctest::Contains("learning rate"), Error);
}

TEST_CASE("trained sphere model: held-out error") {
    // Same layout as the bunny pipeline: uniform samples fill the 1.2x bounding box.
    const auto data = sphere_dataset(200000, 4, 1.08);
    TrainConfig cfg;
    cfg.fourier_scale = 0.3;
    cfg.batch_size = 256;
    auto model = init_model(cfg);
    const auto hist = train(model, data, cfg);
    MESSAGE("sphere validation error " << hist.validation_loss.back() << " after " << hist.seconds << " s");
    CHECK(hist.validation_loss.back() < 1e-3);
    CHECK(hist.validation_loss.back() < hist.initial_validation_loss);

    auto rng = make_rng(6);
    std::uniform_real_distribution<double> u(-1.08, 1.08);
    double lip = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const Vec3 p(u(rng), u(rng), u(rng));
        const Vec3 q = p + 1e-3 * Vec3(u(rng), u(rng), u(rng));
        const double fp = model.forward(p), fq = model.forward(q);
        REQUIRE(std::isfinite(fp));
        lip = std::max(lip, std::abs(fp - fq) / (p - q).norm());
    }
    MESSAGE("empirical Lipschitz constant " << lip);
    CHECK(lip < 10.0);
}

TEST_CASE("trained sphere model: far field") {
    // Wide sampling domain so (2,0,0) is inside the training distribution.
    const auto data = sphere_dataset(200000, 4, 2.2, 0.5);
    TrainConfig cfg;
    cfg.fourier_count = 0;
    cfg.batch_size = 256;
    auto model = init_model(cfg);
    train(model, data, cfg);
    CHECK(model.forward(Vec3(2, 0, 0)) == doctest::Approx(1.1).epsilon(5e-3 / 1.1));

    // Direction error of the learned gradient on the sphere of radius 1.35. A
    // ReLU field fitted in L1 is only piecewise linear, so pointwise directions
    // carry a few percent of error; the bounds below are the measured envelope.
    const Vec3 g = model.input_gradient(std::vector<Vec3>{Vec3(0, 0, 1.35)})[0];
    const double at_pole = (g.normalized() - Vec3(0, 0, 1)).norm();
    auto rng = make_rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec3> ring;
    for (int k = 0; k < 500; ++k) ring.push_back(1.35 * Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized());
    const auto grads = model.input_gradient(ring);
    double mean = 0.0;
    for (std::size_t k = 0; k < ring.size(); ++k) mean += (grads[k].normalized() - ring[k].normalized()).norm();
    mean /= double(ring.size());
    MESSAGE("gradient direction deviation at (0,0,1.35): " << at_pole << ", mean over r=1.35: " << mean);
    CHECK(at_pole < 0.15);
    CHECK(mean < 0.1);
}
