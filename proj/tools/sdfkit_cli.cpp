// sdfkit command-line entry point.

#include "sdfkit/bench.hpp"
#include "sdfkit/cloth.hpp"
#include "sdfkit/reconstruct.hpp"
#include "sdfkit/sampling.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

using namespace sdfkit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kUsageExit = 2;

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

json norm_json(const NormalizationTransform& n) {
    return {{"scale", n.scale}, {"offset", {n.offset.x(), n.offset.y(), n.offset.z()}}};
}

NormalizationTransform norm_from_json(const json& j) {
    NormalizationTransform n;
    n.scale = j.at("scale").get<double>();
    for (int k = 0; k < 3; ++k) n.offset[k] = j.at("offset").at(k).get<double>();
    return n;
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

// Run record written beside every output: command line, configuration, seeds and versions.
class Provenance {
public:
    Provenance(std::string command, std::vector<std::string> argv) : t0_(Clock::now()) {
        doc_["tool"] = "sdfkit";
        doc_["command"] = std::move(command);
        doc_["argv"] = std::move(argv);
        doc_["started_utc"] = utc_now();
        doc_["versions"] = {{"sdfkit", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                          std::to_string(EIGEN_MINOR_VERSION)},
                            {"compiler", __VERSION__},
                            {"cplusplus", __cplusplus}};
    }
    json& operator[](const std::string& k) { return doc_[k]; }
    void input(const fs::path& p) {
        json e = {{"path", p.string()}};
        std::error_code ec;
        if (const auto size = fs::file_size(p, ec); !ec) e["bytes"] = size;
        doc_["inputs"].push_back(e);
    }
    void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }
    void write(const fs::path& path) {
        doc_["seconds"] = since(t0_);
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path.string());
        out << doc_.dump(2) << "\n";
    }

private:
    json doc_;
    Clock::time_point t0_;
};

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".json"); }

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

struct Scene {
    fs::path path;
    TriangleMesh mesh;  // normalized frame
    NormalizationTransform norm;
    std::shared_ptr<MeshSdf> sdf;
    LoadedMesh loaded;
};

Scene load_scene(const fs::path& path) {
    Scene s;
    s.path = path;
    s.loaded = load_mesh(path);
    if (s.loaded.mesh.triangle_count() == 0) throw Error("mesh has no triangles: " + path.string());
    auto [mesh, norm] = normalize(s.loaded.mesh);
    s.mesh = std::move(mesh);
    s.norm = norm;
    s.sdf = std::make_shared<MeshSdf>(s.mesh);
    if (!s.loaded.watertight) std::cerr << "warning: " << path.string() << " is not watertight; signs may be unreliable\n";
    return s;
}

bool is_mesh_file(const fs::path& p) {
    const auto e = p.extension().string();
    return e == ".obj" || e == ".ply" || e == ".OBJ" || e == ".PLY";
}

// Looks for the run record of a model or grid file and returns its fields.
std::optional<json> read_sidecar(const fs::path& artifact) {
    const auto p = sidecar(artifact);
    if (!fs::exists(p)) return std::nullopt;
    std::ifstream in(p);
    try {
        return json::parse(in);
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

// A distance backend loaded from a file: a neural model, a voxel grid or a mesh (exact oracle).
struct Source {
    std::string kind;
    SdfProviderPtr provider;
    std::optional<NormalizationTransform> norm;
    std::optional<fs::path> mesh_path;  // where the truth mesh can be found, if known
};

Source load_source(const fs::path& path) {
    if (!fs::exists(path)) throw Error("no such file: " + path.string());
    Source s;
    const auto ext = path.extension().string();
    const auto record = read_sidecar(path);
    if (record && record->contains("mesh")) s.mesh_path = fs::path(record->at("mesh").get<std::string>());
    if (ext == ".nsdf") {
        auto model = std::make_shared<NeuralSdfModel>(load_model(path));
        s.norm = model->norm();
        s.kind = "neural";
        s.provider = std::make_shared<NeuralSdfProvider>(model);
    } else if (ext == ".vsdf") {
        s.kind = "voxel";
        s.provider = std::make_shared<VoxelSdfProvider>(std::make_shared<VoxelGrid>(load_voxel_grid(path)));
        if (record && record->contains("normalization")) s.norm = norm_from_json(record->at("normalization"));
    } else if (is_mesh_file(path)) {
        auto scene = load_scene(path);
        s.kind = "oracle";
        s.norm = scene.norm;
        s.mesh_path = path;
        s.provider = std::make_shared<MeshSdfProvider>(scene.sdf);
    } else {
        throw Error("unrecognized SDF file (expected .nsdf, .vsdf, .obj or .ply): " + path.string());
    }
    return s;
}

TriangleMesh to_model_units(TriangleMesh mesh, const NormalizationTransform& norm) {
    for (auto& v : mesh.vertices) v = norm.invert(v);
    return mesh;
}

// ---------------------------------------------------------------- mesh-info

struct MeshInfoArgs {
    std::string mesh;
    std::string json_out;
};

int run_mesh_info(const MeshInfoArgs& a, Provenance& prov) {
    const auto loaded = load_mesh(a.mesh);
    const auto& m = loaded.mesh;
    const Aabb box = m.bounds();
    const auto [normalized, norm] = normalize(m);
    std::cout << "file:          " << a.mesh << "\n"
              << "triangles:     " << m.triangle_count() << "\n"
              << "vertices:      " << m.vertex_count() << "\n"
              << "dropped:       " << loaded.dropped_degenerate << " degenerate triangles\n"
              << "watertight:    " << (loaded.watertight ? "yes" : "no") << "\n"
              << "bbox min:      " << box.min.transpose() << "\n"
              << "bbox max:      " << box.max.transpose() << "\n"
              << "bbox extent:   " << box.extent().transpose() << "\n"
              << "volume:        " << m.signed_volume() << "\n"
              << "normalization: scale " << norm.scale << ", offset " << norm.offset.transpose() << "\n";
    if (!a.json_out.empty()) {
        const json j = {{"file", a.mesh},
                        {"triangles", m.triangle_count()},
                        {"vertices", m.vertex_count()},
                        {"dropped_degenerate", loaded.dropped_degenerate},
                        {"watertight", loaded.watertight},
                        {"bbox_min", vec_json(box.min)},
                        {"bbox_max", vec_json(box.max)},
                        {"signed_volume", m.signed_volume()},
                        {"normalization", norm_json(norm)}};
        ensure_parent(a.json_out);
        std::ofstream(a.json_out) << j.dump(2) << "\n";
        prov.input(a.mesh);
        prov.output(a.json_out);
        prov.write(sidecar(a.json_out));
    }
    return 0;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
    std::string mesh, out;
    SamplingConfig cfg;
};

int run_sample(const SampleArgs& a, Provenance& prov) {
    a.cfg.validate();
    const auto scene = load_scene(a.mesh);
    const auto t0 = Clock::now();
    const auto data = build_dataset(*scene.sdf, scene.norm, a.cfg);
    const double secs = since(t0);
    ensure_parent(a.out);
    save_dataset(data, a.out);
    std::cout << "wrote " << data.size() << " samples (" << data.near_count << " near-surface, " << data.uniform_count
              << " uniform; " << data.validation.size() << " held out) to " << a.out << " in " << secs << " s\n";
    prov["mesh"] = fs::absolute(a.mesh).string();
    prov["normalization"] = norm_json(scene.norm);
    prov["config"] = {{"samples", a.cfg.total},
                      {"near_ratio", a.cfg.near_ratio},
                      {"margin_model_units", a.cfg.margin},
                      {"validation_fraction", a.cfg.validation_fraction}};
    prov["seeds"] = {{"sampling", a.cfg.seed}};
    prov["result"] = {{"near", data.near_count}, {"uniform", data.uniform_count}, {"seconds", secs}};
    prov.input(a.mesh);
    prov.output(a.out);
    prov.write(sidecar(a.out));
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string mesh, dataset, out, loss_csv;
    SamplingConfig sampling;
    TrainConfig train;
    std::size_t eval_points = 10000;
};

int run_train(TrainArgs a, Provenance& prov) {
    a.train.validate();
    if (a.mesh.empty() && a.dataset.empty()) throw Error("train needs --mesh or --dataset");
    std::optional<Scene> scene;
    if (!a.mesh.empty()) scene = load_scene(a.mesh);

    double dataset_seconds = 0.0;
    SdfDataset data;
    const auto t0 = Clock::now();
    if (!a.dataset.empty()) {
        data = load_dataset(a.dataset);
        prov.input(a.dataset);
    } else {
        a.sampling.validate();
        data = build_dataset(*scene->sdf, scene->norm, a.sampling);
    }
    dataset_seconds = since(t0);
    std::cout << "dataset: " << data.train.size() << " training, " << data.validation.size() << " held-out samples ("
              << dataset_seconds << " s)\n";

    auto model = init_model(a.train);
    model.set_norm(data.norm);
    const auto hist = train(model, data, a.train, [](int epoch, double tl, double vl) {
        std::cout << "epoch " << std::setw(4) << epoch + 1 << "  train " << std::setw(12) << tl << "  held-out " << vl
                  << std::endl;
    });
    ensure_parent(a.out);
    save_model(model, a.out);

    const fs::path loss = a.loss_csv.empty() ? fs::path(a.out).replace_extension(".loss.csv") : fs::path(a.loss_csv);
    {
        std::ofstream csv(loss);
        csv << "epoch,train_loss,validation_loss\n";
        csv << 0 << ",," << std::setprecision(9) << hist.initial_validation_loss << "\n";
        for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
            csv << e + 1 << "," << hist.train_loss[e] << "," << hist.validation_loss[e] << "\n";
    }

    json result = {{"training_seconds", hist.seconds},
                   {"dataset_seconds", dataset_seconds},
                   {"final_validation_loss", hist.validation_loss.empty() ? 0.0 : hist.validation_loss.back()},
                   {"parameters", model.parameter_count()},
                   {"model_bytes", fs::file_size(a.out)}};
    if (scene && a.eval_points > 0) {
        const NeuralSdfProvider provider(std::make_shared<NeuralSdfModel>(model), NeuralSdfProvider::Precision::Double);
        AccuracyOptions ao;
        ao.test_points = a.eval_points;
        ao.margin = scene->norm.to_normalized(data.config.margin);
        ao.resolution = 0;
        const auto r = evaluate_accuracy(provider, *scene->sdf, scene->norm, ao);
        result["near_surface_mean_abs_error"] = r.mean_abs_error;
        result["near_surface_mean_abs_error_model_units"] = r.mean_abs_error_model;
        result["bbox_diagonal"] = scene->mesh.bounds().extent().norm();
        std::cout << "held-out near-surface mean |error|: " << r.mean_abs_error << " normalized (" << r.mean_abs_error_model
                  << " model units)\n";
    }
    std::cout << "wrote " << a.out << " and " << loss.string() << " (" << hist.seconds << " s training)\n";

    if (scene) prov["mesh"] = fs::absolute(a.mesh).string();
    prov["normalization"] = norm_json(data.norm);
    prov["config"] = {{"samples", data.size()},
                      {"near_ratio", data.config.near_ratio},
                      {"margin_model_units", data.config.margin},
                      {"epochs", a.train.epochs},
                      {"batch_size", a.train.batch_size},
                      {"learning_rate", a.train.learning_rate},
                      {"final_lr_fraction", a.train.final_lr_fraction},
                      {"fourier_count", a.train.fourier_count},
                      {"fourier_scale", a.train.fourier_scale},
                      {"layers", a.train.layer_count},
                      {"width", a.train.hidden_width}};
    prov["seeds"] = {{"sampling", data.config.seed}, {"training", a.train.seed}};
    prov["result"] = result;
    if (scene) prov.input(a.mesh);
    prov.output(a.out);
    prov.output(loss);
    prov.write(sidecar(a.out));
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string mesh, sdf, out;
    AccuracyOptions opts;
    double margin_m = 0.005;
};

int run_eval(EvalArgs a, Provenance& prov) {
    const auto scene = load_scene(a.mesh);
    const auto src = load_source(a.sdf);
    a.opts.margin = scene.norm.to_normalized(a.margin_m);
    const auto r = evaluate_accuracy(*src.provider, *scene.sdf, scene.norm, a.opts);
    const double diag = scene.mesh.bounds().extent().norm();
    json j = {{"backend", src.kind},
              {"test_points", r.test_points},
              {"mean_abs_error", r.mean_abs_error},
              {"max_abs_error", r.max_abs_error},
              {"mean_abs_error_model_units", r.mean_abs_error_model},
              {"max_abs_error_model_units", r.max_abs_error_model},
              {"bbox_diagonal", diag},
              {"mean_error_over_diagonal", r.mean_abs_error / diag}};
    if (r.chamfer) {
        j["chamfer"] = *r.chamfer;
        j["chamfer_model_units"] = *r.chamfer_model;
        j["reconstruction_resolution"] = r.resolution;
        j["reconstructed_triangles"] = r.reconstructed_triangles;
    }
    std::cout << j.dump(2) << "\n";
    if (!a.out.empty()) {
        ensure_parent(a.out);
        std::ofstream(a.out) << j.dump(2) << "\n";
        prov["config"] = {{"test_points", a.opts.test_points},
                          {"margin_model_units", a.margin_m},
                          {"resolution", a.opts.resolution},
                          {"chamfer_samples", a.opts.chamfer_samples}};
        prov["seeds"] = {{"test_points", a.opts.seed}};
        prov.input(a.mesh);
        prov.input(a.sdf);
        prov.output(a.out);
        prov.write(sidecar(a.out));
    }
    return 0;
}

// ---------------------------------------------------------------- voxelize

struct VoxelizeArgs {
    std::string mesh, out;
    int resolution = 128;
    bool gradients = false;
};

int run_voxelize(const VoxelizeArgs& a, Provenance& prov) {
    const auto scene = load_scene(a.mesh);
    const auto t0 = Clock::now();
    const auto grid = build_voxel_sdf(*scene.sdf, a.resolution, a.gradients);
    const double secs = since(t0);
    ensure_parent(a.out);
    save_voxel_grid(grid, a.out);
    const std::size_t evaluations = std::size_t(a.resolution) * a.resolution * a.resolution;
    std::cout << "N=" << a.resolution << ": " << evaluations << " oracle evaluations in " << secs << " s; payload "
              << grid.payload_bytes() << " B, file " << fs::file_size(a.out) << " B, node diagonal " << grid.cell_diagonal()
              << "\n";
    prov["mesh"] = fs::absolute(a.mesh).string();
    prov["normalization"] = norm_json(scene.norm);
    prov["config"] = {{"resolution", a.resolution},
                      {"gradients", a.gradients},
                      {"box_min", vec_json(grid.box().min)},
                      {"box_max", vec_json(grid.box().max)}};
    prov["seeds"] = json::object();
    prov["result"] = {{"seconds", secs}, {"oracle_evaluations", evaluations}, {"payload_bytes", grid.payload_bytes()}};
    prov.input(a.mesh);
    prov.output(a.out);
    prov.write(sidecar(a.out));
    return 0;
}

// ---------------------------------------------------------------- reconstruct

struct ReconstructArgs {
    std::string sdf, mesh, out;
    int resolution = 128;
    bool normalized = false;
};

int run_reconstruct(const ReconstructArgs& a, Provenance& prov) {
    const auto src = load_source(a.sdf);
    std::optional<Scene> truth;
    if (!a.mesh.empty()) truth = load_scene(a.mesh);
    const auto norm = truth ? std::optional(truth->norm) : src.norm;
    const Aabb box = truth ? padded_bounds(truth->mesh) : Aabb{Vec3::Constant(-1.08), Vec3::Constant(1.08)};
    const auto t0 = Clock::now();
    auto mesh = marching_cubes(*src.provider, a.resolution, box);
    const double secs = since(t0);
    if (!a.normalized) {
        if (!norm) throw Error("no normalization known for " + a.sdf + "; pass --mesh or --normalized");
        mesh = to_model_units(std::move(mesh), *norm);
    }
    ensure_parent(a.out);
    save_obj(mesh, a.out);
    std::cout << "wrote " << mesh.triangle_count() << " triangles to " << a.out << " (" << secs << " s, "
              << (is_watertight(mesh) ? "watertight" : "open") << ")\n";
    prov["config"] = {{"resolution", a.resolution}, {"units", a.normalized ? "normalized" : "model"}, {"backend", src.kind}};
    prov["seeds"] = json::object();
    prov["result"] = {{"triangles", mesh.triangle_count()}, {"seconds", secs}};
    prov.input(a.sdf);
    if (truth) prov.input(a.mesh);
    prov.output(a.out);
    prov.write(sidecar(a.out));
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string cloth = "64x64", sdf, mesh, out, pins = "center";
    int steps = 500, frame_interval = 10, iters = 3, max_substeps = 128;
    double side_m = 0.25, mass = 0.2, epsilon_m = 0.001, gravity_m = 9.81, dt = 1.0 / 300.0, damping = 0.01;
    double drop_m = 0.01;
    std::optional<double> height;
    double k_structural = 5000.0, k_shear = 500.0, k_bend = 50.0;
};

std::pair<int, int> parse_cloth(const std::string& s) {
    const auto x = s.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        std::size_t used = 0;
        const int r = std::stoi(s.substr(0, x), &used);
        if (used != x) throw std::invalid_argument(s);
        const int c = std::stoi(s.substr(x + 1), &used);
        if (used != s.size() - x - 1) throw std::invalid_argument(s);
        return {r, c};
    } catch (const std::exception&) {
        throw Error("--cloth expects ROWSxCOLS, got '" + s + "'");
    }
}

int run_simulate(const SimulateArgs& a, Provenance& prov) {
    const auto [rows, cols] = parse_cloth(a.cloth);
    const auto src = load_source(a.sdf);
    std::optional<fs::path> truth_path = a.mesh.empty() ? src.mesh_path : std::optional(fs::path(a.mesh));
    std::optional<Scene> truth;
    if (truth_path && fs::exists(*truth_path)) truth = load_scene(*truth_path);
    else std::cerr << "warning: no mesh for exact-oracle containment; pass --mesh to enable those columns\n";
    const auto norm = truth ? std::optional(truth->norm) : src.norm;
    if (!norm) throw Error("no normalization known for " + a.sdf + "; pass --mesh");

    SimConfig cfg;
    cfg.dt = a.dt;
    cfg.damping = a.damping;
    cfg.gravity = Vec3(0, -norm->to_normalized(a.gravity_m), 0);
    cfg.structural_stiffness = a.k_structural;
    cfg.shear_stiffness = a.k_shear;
    cfg.bend_stiffness = a.k_bend;
    cfg.max_substeps = a.max_substeps;
    cfg.steps = a.steps;
    cfg.frame_interval = a.frame_interval;
    cfg.collision = CollisionConfig::from_model_units(a.epsilon_m, *norm, a.iters);
    cfg.validate();

    std::vector<std::uint32_t> pins;
    if (a.pins == "center") {
        const std::uint32_t r0 = rows / 2 - 1, r1 = rows / 2, c0 = cols / 2 - 1, c1 = cols / 2;
        pins = {r0 * cols + c0, r0 * cols + c1, r1 * cols + c0, r1 * cols + c1};
    } else if (a.pins == "corners") {
        pins = {0, std::uint32_t(cols - 1), std::uint32_t((rows - 1) * cols), std::uint32_t(rows * cols - 1)};
    } else if (a.pins != "none") {
        throw Error("--pins must be center, corners or none");
    }
    const double spacing = norm->to_normalized(a.side_m / std::max(cols - 1, 1));
    Vec3 origin(0, 1.0, 0);
    if (truth) {
        const Aabb b = truth->mesh.bounds();
        origin = Vec3(b.center().x(), b.max.y() + norm->to_normalized(a.drop_m), b.center().z());
    }
    if (a.height) origin.y() = *a.height;
    auto state = init_cloth(rows, cols, spacing, a.mass, pins, origin);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    std::ofstream csv(dir / "containment.csv");
    csv << "frame,step,min_provider_distance,min_oracle_distance,below_offset\n" << std::setprecision(9);
    const double eps = cfg.collision.epsilon;
    std::size_t final_below = 0;
    double final_min = std::numeric_limits<double>::quiet_NaN();
    const auto t0 = Clock::now();
    simulate(state, cfg, src.provider.get(), [&](int frame, const ClothState& s) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05d.obj", frame);
        write_cloth_obj(s, dir / name);
        double pmin = std::numeric_limits<double>::infinity();
        for (double d : src.provider->distances(s.x)) pmin = std::min(pmin, d);
        csv << frame << "," << s.step_index << "," << pmin << ",";
        if (truth) {
            double omin = std::numeric_limits<double>::infinity();
            std::size_t below = 0;
            for (const auto& x : s.x) {
                const double f = truth->sdf->signed_distance(x);
                omin = std::min(omin, f);
                below += f < eps - 1e-3;
            }
            csv << omin << "," << below;
            final_below = below;
            final_min = omin;
        } else {
            csv << ",";
        }
        csv << "\n";
    });
    const double secs = since(t0);
    const int frames = cfg.steps / cfg.frame_interval + 1;

    const json config = {{"cloth", {{"rows", rows}, {"cols", cols}, {"side_m", a.side_m}, {"spacing", spacing},
                                    {"mass_kg", a.mass}, {"pins", a.pins}, {"origin", vec_json(origin)}}},
                         {"sdf", {{"path", a.sdf}, {"kind", src.kind}}},
                         {"units", {{"normalized_per_meter", norm->scale}}},
                         {"dt", cfg.dt},
                         {"steps", cfg.steps},
                         {"frame_interval", cfg.frame_interval},
                         {"gravity", vec_json(cfg.gravity)},
                         {"damping", cfg.damping},
                         {"stiffness", {{"structural", cfg.structural_stiffness}, {"shear", cfg.shear_stiffness},
                                        {"bend", cfg.bend_stiffness}}},
                         {"substeps", std::min(stable_substeps(state, cfg), cfg.max_substeps)},
                         {"epsilon", eps},
                         {"max_projection_iters", cfg.collision.max_projection_iters}};
    std::ofstream(dir / "config.json") << config.dump(2) << "\n";

    std::cout << "simulated " << cfg.steps << " steps in " << secs << " s; wrote " << frames << " frames to " << dir.string()
              << "\n";
    if (truth)
        std::cout << "final frame: " << state.vertex_count() - final_below << "/" << state.vertex_count()
                  << " vertices with oracle distance >= eps - 1e-3 (min " << final_min << ", eps " << eps << ")\n";
    prov["config"] = config;
    prov["seeds"] = json::object();
    prov["result"] = {{"seconds", secs}, {"frames", frames}};
    if (truth) prov["result"]["final_contained_fraction"] = 1.0 - double(final_below) / double(state.vertex_count());
    prov.input(a.sdf);
    if (truth) prov.input(*truth_path);
    prov.output(dir / "containment.csv");
    prov.output(dir / "config.json");
    prov.write(dir / "provenance.json");
    return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::vector<std::string> meshes;
    std::vector<std::string> backends = {"oracle"};
    std::vector<std::size_t> queries = {10000, 40000, 100000};
    std::vector<int> threads = {1};
    int repeats = 5;
    std::uint64_t seed = 99;
    double epsilon_m = 0.001;
    std::string out = "report.csv";
};

void print_reference_table() {
    std::cout << "Published reference timings (GPU and 48-core CPU; not comparable with this machine):\n"
              << "  queries | KD-tree bunny          | KD-tree dragon         | voxel N=256 | neural bunny | neural dragon\n"
              << "  10K     | 11.7 ms (675 ms serial)  | 51.9 ms (748 ms serial)  | ~0.1 ms     | 0.73 ms      | 1.00 ms\n"
              << "  40K     | 45.3 ms (4.2 s serial)   | 209.9 ms (4.4 s serial)  | ~0.1 ms     | 4.35 ms      | 0.95 ms\n"
              << "  1M      | 1415 ms (173 s serial)   | 9900 ms (175 s serial)   | ~0.1 ms     | 350.0 ms     | 255.0 ms\n\n";
}

int run_bench_cmd(const BenchArgs& a, Provenance& prov) {
    if (a.meshes.empty()) throw Error("bench needs --mesh");
    struct Spec {
        std::string kind;
        std::string arg;
    };
    std::vector<Spec> specs;
    for (const auto& b : a.backends) {
        const auto colon = b.find(':');
        Spec s{b.substr(0, colon), colon == std::string::npos ? "" : b.substr(colon + 1)};
        if (s.kind == "oracle") {
            if (!s.arg.empty()) throw Error("oracle backend takes no argument, got '" + b + "'");
        } else if (s.kind == "voxel") {
            if (s.arg.empty()) s.arg = "128";
            try {
                if (std::stoi(s.arg) < 2) throw std::invalid_argument(s.arg);
            } catch (const std::exception&) {
                throw Error("voxel backend expects voxel:N with N >= 2, got '" + b + "'");
            }
        } else if (s.kind == "neural") {
            if (s.arg.empty()) throw Error("neural backend expects neural:MODEL.nsdf");
        } else {
            throw Error("unknown backend '" + b + "' (expected oracle, voxel:N or neural:MODEL)");
        }
        specs.push_back(s);
    }

    std::vector<BenchRow> rows;
    json construction = json::array();
    for (const auto& mesh_path : a.meshes) {
        const auto scene = load_scene(mesh_path);
        const std::string label = fs::path(mesh_path).stem().string();
        prov.input(mesh_path);
        std::vector<BenchTarget> targets;
        const Aabb box = padded_bounds(scene.mesh);
        for (const auto& s : specs) {
            if (s.kind == "oracle") {
                const auto r = measure_bvh_construction(scene.mesh);
                construction.push_back({{"backend", "oracle"}, {"mesh", label}, {"seconds", r.seconds}, {"bytes", r.artifact_bytes}});
                targets.push_back({"oracle", label, std::make_shared<MeshSdfProvider>(scene.sdf), box});
            } else if (s.kind == "voxel") {
                const int n = std::stoi(s.arg);
                const auto t0 = Clock::now();
                auto grid = std::make_shared<VoxelGrid>(build_voxel_sdf(*scene.sdf, n, false));
                construction.push_back({{"backend", "voxel:" + s.arg},
                                        {"mesh", label},
                                        {"seconds", since(t0)},
                                        {"bytes", grid->payload_bytes()},
                                        {"oracle_evaluations", std::size_t(n) * n * n}});
                targets.push_back({"voxel:" + s.arg, label, std::make_shared<VoxelSdfProvider>(grid), box});
            } else {
                auto model = std::make_shared<NeuralSdfModel>(load_model(s.arg));
                prov.input(s.arg);
                json c = {{"backend", "neural"}, {"mesh", label}, {"bytes", fs::file_size(s.arg)}};
                if (const auto rec = read_sidecar(s.arg); rec && rec->contains("result")) {
                    const auto& r = rec->at("result");
                    c["seconds"] = r.value("dataset_seconds", 0.0) + r.value("training_seconds", 0.0);
                }
                construction.push_back(c);
                targets.push_back({"neural", label, std::make_shared<NeuralSdfProvider>(model), box});
            }
        }
        BenchOptions opts;
        opts.query_counts = a.queries;
        opts.repeats = a.repeats;
        opts.threads = a.threads;
        opts.seed = a.seed;
        opts.collision = CollisionConfig::from_model_units(a.epsilon_m, scene.norm, 1);
        for (auto& r : run_bench(targets, opts)) rows.push_back(std::move(r));
    }

    ensure_parent(a.out);
    write_bench_csv(rows, a.out);
    print_reference_table();
    std::cout << "Measured (median of " << a.repeats << " runs, full contact-point path):\n";
    for (const auto& r : rows)
        std::cout << "  " << std::left << std::setw(12) << r.backend << std::setw(14) << r.mesh << std::right << std::setw(8)
                  << r.queries << " queries " << std::setw(3) << r.threads << " thr  " << std::fixed << std::setprecision(3)
                  << std::setw(10) << r.median_ms << " ms  " << std::setprecision(1) << std::setw(9) << r.per_query_ns
                  << " ns/query  " << r.mem_bytes << " B\n"
                  << std::defaultfloat;

    json jrows = json::array();
    for (const auto& r : rows)
        jrows.push_back({{"backend", r.backend},   {"mesh", r.mesh},           {"queries", r.queries},
                         {"threads", r.threads},   {"times_ms", r.times_ms},   {"median_ms", r.median_ms},
                         {"p10_ms", r.p10_ms},     {"p90_ms", r.p90_ms},       {"per_query_ns", r.per_query_ns},
                         {"mem_bytes", r.mem_bytes}});
    prov["config"] = {{"backends", a.backends}, {"queries", a.queries}, {"threads", a.threads}, {"repeats", a.repeats},
                      {"epsilon_m", a.epsilon_m}};
    prov["seeds"] = {{"queries", a.seed}};
    prov["rows"] = jrows;
    prov["construction"] = construction;
    prov.output(a.out);
    prov.write(sidecar(a.out));
    std::cout << "wrote " << a.out << " and " << sidecar(a.out).string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sdfkit: signed-distance backends for collision handling"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough(false);

    MeshInfoArgs info;
    auto* c_info = app.add_subcommand("mesh-info", "Print triangle count, watertightness and bounding box of a mesh");
    c_info->add_option("mesh", info.mesh, "Mesh file (.obj or binary little-endian .ply)")->required();
    c_info->add_option("--json", info.json_out, "Also write the summary as JSON to this path");

    SampleArgs sample;
    auto* c_sample = app.add_subcommand("sample", "Build a labeled training dataset from a mesh");
    c_sample->add_option("--mesh", sample.mesh, "Input mesh")->required();
    c_sample->add_option("--samples", sample.cfg.total, "Total samples")->capture_default_str();
    c_sample->add_option("--near-ratio", sample.cfg.near_ratio, "Fraction of near-surface samples")->capture_default_str();
    c_sample->add_option("--margin", sample.cfg.margin, "Near-surface offset std. dev., model units (meters)")->capture_default_str();
    c_sample->add_option("--validation-fraction", sample.cfg.validation_fraction, "Held-out fraction")->capture_default_str();
    c_sample->add_option("--seed", sample.cfg.seed, "Sampling seed")->capture_default_str();
    c_sample->add_option("--out", sample.out, "Output dataset file")->required();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a neural SDF and write the model plus a loss-history CSV");
    c_train->add_option("--mesh", tr.mesh, "Mesh to sample (also used for the final accuracy report)");
    c_train->add_option("--dataset", tr.dataset, "Use a dataset written by `sample` instead of sampling");
    c_train->add_option("--samples", tr.sampling.total, "Samples to draw when sampling from --mesh")->capture_default_str();
    c_train->add_option("--near-ratio", tr.sampling.near_ratio, "Fraction of near-surface samples")->capture_default_str();
    c_train->add_option("--margin", tr.sampling.margin, "Near-surface offset std. dev., model units (meters)")->capture_default_str();
    c_train->add_option("--sample-seed", tr.sampling.seed, "Sampling seed")->capture_default_str();
    c_train->add_option("--layers", tr.train.layer_count, "Fully connected layers including the output layer")->capture_default_str();
    c_train->add_option("--width", tr.train.hidden_width, "Hidden units per layer")->capture_default_str();
    c_train->add_option("--fourier", tr.train.fourier_count, "Fourier feature count m (0 for a plain MLP)")->capture_default_str();
    c_train->add_option("--sigma", tr.train.fourier_scale, "Std. dev. of the Fourier frequency matrix")->capture_default_str();
    c_train->add_option("--epochs", tr.train.epochs, "Training epochs")->capture_default_str();
    c_train->add_option("--batch", tr.train.batch_size, "Batch size")->capture_default_str();
    c_train->add_option("--lr", tr.train.learning_rate, "Initial Adam learning rate")->capture_default_str();
    c_train->add_option("--final-lr-fraction", tr.train.final_lr_fraction, "Final learning rate as a fraction of --lr")
        ->capture_default_str();
    c_train->add_option("--seed", tr.train.seed, "Initialization and shuffling seed")->capture_default_str();
    c_train->add_option("--eval-points", tr.eval_points, "Near-surface points for the final error report (0 skips)")
        ->capture_default_str();
    c_train->add_option("--loss-csv", tr.loss_csv, "Loss-history CSV path (default: <out> with .loss.csv)");
    c_train->add_option("--out", tr.out, "Output model file (.nsdf)")->required();

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Compare a backend with the exact oracle on near-surface points");
    c_eval->add_option("--mesh", ev.mesh, "Ground-truth mesh")->required();
    c_eval->add_option("--sdf", ev.sdf, "Backend file: .nsdf model, .vsdf grid or a mesh")->required();
    c_eval->add_option("--points", ev.opts.test_points, "Test points")->capture_default_str();
    c_eval->add_option("--margin", ev.margin_m, "Near-surface offset std. dev., model units (meters)")->capture_default_str();
    c_eval->add_option("--seed", ev.opts.seed, "Test point seed")->capture_default_str();
    c_eval->add_option("--resolution", ev.opts.resolution, "Marching-cubes lattice for the chamfer metric (0 skips)")
        ->capture_default_str();
    c_eval->add_option("--chamfer-samples", ev.opts.chamfer_samples, "Surface samples per side for chamfer")->capture_default_str();
    c_eval->add_option("--out", ev.out, "Write the report as JSON");

    VoxelizeArgs vx;
    auto* c_vox = app.add_subcommand("voxelize", "Fill an N^3 grid with exact signed distances");
    c_vox->add_option("--mesh", vx.mesh, "Input mesh")->required();
    c_vox->add_option("--resolution", vx.resolution, "Nodes per axis")->capture_default_str()->check(CLI::Range(2, 1024));
    c_vox->add_flag("--gradients", vx.gradients, "Also store per-node unit gradients");
    c_vox->add_option("--out", vx.out, "Output grid file (.vsdf)")->required();

    ReconstructArgs rc;
    auto* c_rec = app.add_subcommand("reconstruct", "Extract the zero level set with marching cubes");
    c_rec->add_option("--sdf", rc.sdf, "Backend file: .nsdf model, .vsdf grid or a mesh")->required();
    c_rec->add_option("--mesh", rc.mesh, "Reference mesh for the lattice box and units");
    c_rec->add_option("--resolution", rc.resolution, "Lattice nodes per axis")->capture_default_str()->check(CLI::Range(8, 2048));
    c_rec->add_flag("--normalized", rc.normalized, "Keep normalized coordinates instead of model units");
    c_rec->add_option("--out", rc.out, "Output OBJ")->required();

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Drop a mass-spring cloth onto an SDF collider");
    c_sim->add_option("--cloth", sim.cloth, "Cloth vertices as ROWSxCOLS")->capture_default_str();
    c_sim->add_option("--sdf", sim.sdf, "Collider: .nsdf model, .vsdf grid or a mesh (exact oracle)")->required();
    c_sim->add_option("--mesh", sim.mesh, "Ground-truth mesh for containment (default: from the collider's run record)");
    c_sim->add_option("--steps", sim.steps, "Time steps")->capture_default_str();
    c_sim->add_option("--frame-interval", sim.frame_interval, "Write every k-th step")->capture_default_str();
    c_sim->add_option("--dt", sim.dt, "Step length, seconds")->capture_default_str();
    c_sim->add_option("--side", sim.side_m, "Cloth width, meters")->capture_default_str();
    c_sim->add_option("--mass", sim.mass, "Cloth mass, kg")->capture_default_str();
    c_sim->add_option("--pins", sim.pins, "Pinned vertices: center, corners or none")->capture_default_str();
    c_sim->add_option("--height", sim.height, "Cloth height in normalized units (default: just above the mesh)");
    c_sim->add_option("--drop", sim.drop_m, "Gap above the mesh top, meters")->capture_default_str();
    c_sim->add_option("--epsilon", sim.epsilon_m, "Collision offset, meters")->capture_default_str();
    c_sim->add_option("--iters", sim.iters, "Projection iterations per contact")->capture_default_str();
    c_sim->add_option("--gravity", sim.gravity_m, "Gravity magnitude, m/s^2")->capture_default_str();
    c_sim->add_option("--damping", sim.damping, "Fraction of velocity removed per step")->capture_default_str();
    c_sim->add_option("--k-structural", sim.k_structural, "Structural spring stiffness, N/m")->capture_default_str();
    c_sim->add_option("--k-shear", sim.k_shear, "Shear spring stiffness, N/m")->capture_default_str();
    c_sim->add_option("--k-bend", sim.k_bend, "Bend spring stiffness, N/m")->capture_default_str();
    c_sim->add_option("--max-substeps", sim.max_substeps, "Cap on stability substeps")->capture_default_str();
    c_sim->add_option("--out", sim.out, "Output directory for frames, containment.csv and config.json")->required();

    BenchArgs bn;
    auto* c_bench = app.add_subcommand("bench", "Time the contact-point path of each backend");
    c_bench->add_option("--mesh", bn.meshes, "Mesh file(s), comma separated")->required()->delimiter(',');
    c_bench->add_option("--backends", bn.backends, "Comma-separated: oracle, voxel:N, neural:MODEL.nsdf")
        ->delimiter(',')
        ->capture_default_str();
    c_bench->add_option("--queries", bn.queries, "Comma-separated query counts")->delimiter(',')->capture_default_str();
    c_bench->add_option("--threads", bn.threads, "Comma-separated thread counts")->delimiter(',')->capture_default_str();
    c_bench->add_option("--repeats", bn.repeats, "Timed repetitions per cell (at least 5)")->capture_default_str();
    c_bench->add_option("--seed", bn.seed, "Query point seed")->capture_default_str();
    c_bench->add_option("--epsilon", bn.epsilon_m, "Collision offset, meters")->capture_default_str();
    c_bench->add_option("--out", bn.out, "CSV report; a JSON sidecar is written beside it")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return kUsageExit;
    }

    std::vector<std::string> args(argv, argv + argc);
    try {
        const std::string name = app.get_subcommands().front()->get_name();
        Provenance prov(name, args);
        if (*c_info) return run_mesh_info(info, prov);
        if (*c_sample) return run_sample(sample, prov);
        if (*c_train) return run_train(tr, prov);
        if (*c_eval) return run_eval(ev, prov);
        if (*c_vox) return run_voxelize(vx, prov);
        if (*c_rec) return run_reconstruct(rc, prov);
        if (*c_sim) return run_simulate(sim, prov);
        if (*c_bench) return run_bench_cmd(bn, prov);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
