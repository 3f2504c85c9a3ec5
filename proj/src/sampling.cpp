#include "sdfkit/sampling.hpp"

#include "sdfkit/binary_io.hpp"
#include "sdfkit/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>

namespace sdfkit {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;

// Round-trip through float so stored records carry exactly the labeled point.
Vec3 as_stored(const Vec3& p) { return round_to_float(p); }

class SurfaceSampler {
public:
    explicit SurfaceSampler(const TriangleMesh& mesh) : mesh_(mesh) {
        cdf_.reserve(mesh.triangle_count());
        double acc = 0.0;
        for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
            acc += mesh.area(t);
            cdf_.push_back(acc);
        }
    }

    // Returns the point and the triangle it lies on.
    std::pair<Vec3, std::uint32_t> operator()(Rng& rng) const {
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double r = uni(rng) * cdf_.back();
        auto t = std::uint32_t(std::upper_bound(cdf_.begin(), cdf_.end(), r) - cdf_.begin());
        t = std::min<std::uint32_t>(t, std::uint32_t(cdf_.size() - 1));
        const double s = std::sqrt(uni(rng)), v = uni(rng);
        const Vec3 p = (1.0 - s) * mesh_.corner(t, 0) + s * (1.0 - v) * mesh_.corner(t, 1) + s * v * mesh_.corner(t, 2);
        return {p, t};
    }

private:
    const TriangleMesh& mesh_;
    std::vector<double> cdf_;
};

}  // namespace

void SamplingConfig::validate() const {
    if (!(near_ratio >= 0.0 && near_ratio <= 1.0)) throw Error("near_ratio must lie in [0, 1]");
    if (!(margin > 0.0)) throw Error("margin must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) throw Error("validation_fraction must lie in [0, 1)");
}

Aabb padded_bounds(const TriangleMesh& mesh, double factor) {
    const Aabb box = mesh.bounds();
    const Vec3 c = box.center(), half = Vec3::Constant(0.5 * factor * box.extent().maxCoeff());
    return {c - half, c + half};
}

std::vector<SdfSample> sample_near_surface(const MeshSdf& sdf, std::size_t n, double margin, std::uint64_t seed) {
    if (!(margin > 0.0)) throw Error("margin must be positive");
    std::vector<SdfSample> out;
    if (n == 0) return out;
    out.reserve(n);
    Rng rng = make_rng(seed, 1);
    std::normal_distribution<double> gauss(0.0, margin);
    const SurfaceSampler surface(sdf.mesh());
    for (std::size_t i = 0; i < n; ++i) {
        const auto [base, tri] = surface(rng);
        const double dx = gauss(rng), dy = gauss(rng), dz = gauss(rng);
        const Vec3 p = as_stored(base + Vec3(dx, dy, dz));
        out.push_back({p, sdf.query(p, tri).signed_distance});
    }
    return out;
}

std::vector<SdfSample> sample_uniform(const MeshSdf& sdf, std::size_t n, std::uint64_t seed) {
    std::vector<SdfSample> out;
    if (n == 0) return out;
    out.reserve(n);
    Rng rng = make_rng(seed, 2);
    const Aabb box = padded_bounds(sdf.mesh());
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = uni(rng), v = uni(rng), w = uni(rng);
        const Vec3 p = as_stored(box.min + Vec3(u, v, w).cwiseProduct(box.extent()));
        out.push_back({p, sdf.signed_distance(p)});
    }
    return out;
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    std::vector<Vec3> out;
    if (n == 0 || mesh.triangles.empty()) return out;
    out.reserve(n);
    Rng rng = make_rng(seed, 3);
    const SurfaceSampler surface(mesh);
    for (std::size_t i = 0; i < n; ++i) out.push_back(surface(rng).first);
    return out;
}

SdfDataset build_dataset(const MeshSdf& sdf, const NormalizationTransform& norm, const SamplingConfig& cfg) {
    cfg.validate();
    SdfDataset data;
    data.norm = norm;
    data.config = cfg;
    data.near_count = std::uint64_t(std::llround(cfg.near_ratio * double(cfg.total)));
    data.uniform_count = cfg.total - data.near_count;

    auto samples = sample_near_surface(sdf, data.near_count, norm.to_normalized(cfg.margin), cfg.seed);
    const auto uniform = sample_uniform(sdf, data.uniform_count, cfg.seed);
    samples.insert(samples.end(), uniform.begin(), uniform.end());

    Rng rng = make_rng(cfg.seed, 4);
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto n_val = std::size_t(std::floor(cfg.validation_fraction * double(samples.size())));
    data.validation.assign(samples.end() - std::ptrdiff_t(n_val), samples.end());
    samples.resize(samples.size() - n_val);
    data.train = std::move(samples);
    return data;
}

void save_dataset(const SdfDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    io::write_magic(out, "SDFD");
    io::write_pod(out, kDatasetVersion);
    io::write_pod(out, std::uint64_t(data.size()));
    io::write_pod(out, float(data.norm.scale));
    for (int k = 0; k < 3; ++k) io::write_pod(out, float(data.norm.offset[k]));
    const nlohmann::json meta = {
        {"sampling",
         {{"total", data.config.total},
          {"near_ratio", data.config.near_ratio},
          {"margin", data.config.margin},
          {"seed", data.config.seed},
          {"validation_fraction", data.config.validation_fraction}}},
        {"train_count", data.train.size()},
        {"near_count", data.near_count},
        {"uniform_count", data.uniform_count},
        {"normalization", {{"scale", data.norm.scale}, {"offset", {data.norm.offset.x(), data.norm.offset.y(), data.norm.offset.z()}}}},
    };
    io::write_string(out, meta.dump());
    auto write_records = [&](const std::vector<SdfSample>& v) {
        std::vector<float> buf;
        buf.reserve(v.size() * 4);
        for (const auto& s : v) {
            buf.push_back(float(s.p.x()));
            buf.push_back(float(s.p.y()));
            buf.push_back(float(s.p.z()));
            buf.push_back(float(s.d));
        }
        out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
    };
    write_records(data.train);
    write_records(data.validation);
    if (!out) throw Error("write failed for " + path.string());
}

SdfDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset " + path.string());
    io::expect_magic(in, "SDFD");
    if (const auto v = io::read_pod<std::uint32_t>(in, "version"); v != kDatasetVersion)
        throw FormatError("unsupported dataset version " + std::to_string(v));
    const auto count = io::read_pod<std::uint64_t>(in, "count");
    SdfDataset data;
    data.norm.scale = io::read_pod<float>(in, "normalization");
    for (int k = 0; k < 3; ++k) data.norm.offset[k] = io::read_pod<float>(in, "normalization");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(io::read_string(in, "metadata"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad dataset metadata: ") + e.what());
    }
    try {
        const auto& s = meta.at("sampling");
        data.config.total = s.at("total");
        data.config.near_ratio = s.at("near_ratio");
        data.config.margin = s.at("margin");
        data.config.seed = s.at("seed");
        data.config.validation_fraction = s.at("validation_fraction");
        data.near_count = meta.at("near_count");
        data.uniform_count = meta.at("uniform_count");
        // The JSON copy keeps full precision; the f32 header is for quick inspection.
        data.norm.scale = meta.at("normalization").at("scale");
        for (int k = 0; k < 3; ++k) data.norm.offset[k] = meta.at("normalization").at("offset").at(k);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad dataset metadata: ") + e.what());
    }
    const std::uint64_t train_count = meta.value("train_count", count);
    if (train_count > count) throw FormatError("train_count exceeds record count");
    std::vector<float> buf(count * 4);
    if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float))))
        throw FormatError("dataset records truncated");
    for (std::uint64_t i = 0; i < count; ++i) {
        const float* r = &buf[i * 4];
        SdfSample s{Vec3(r[0], r[1], r[2]), r[3]};
        (i < train_count ? data.train : data.validation).push_back(s);
    }
    return data;
}

}  // namespace sdfkit
