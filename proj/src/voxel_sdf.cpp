#include "sdfkit/voxel_sdf.hpp"

#include "sdfkit/binary_io.hpp"
#include "sdfkit/sampling.hpp"

#include <cmath>
#include <fstream>

namespace sdfkit {

namespace {
constexpr std::uint32_t kVoxelVersion = 1;
}

VoxelGrid::VoxelGrid(int resolution, const Aabb& box, std::vector<float> values, std::vector<float> gradients)
    : n_(resolution), values_(std::move(values)), gradients_(std::move(gradients)) {
    // The file stores the box as float32; keep the in-memory box identical.
    box_.min = round_to_float(box.min);
    box_.max = round_to_float(box.max);
    if (n_ < 2) throw Error("voxel resolution must be at least 2");
    if (box_.empty() || !(box_.extent().array() > 0.0).all()) throw Error("voxel box must have positive extent");
    const std::size_t count = std::size_t(n_) * n_ * n_;
    if (values_.size() != count) throw Error("voxel value array has the wrong size");
    if (!gradients_.empty() && gradients_.size() != 3 * count) throw Error("voxel gradient array has the wrong size");
    h_ = box_.extent() / double(n_ - 1);
}

VoxelGrid::Query VoxelGrid::query_trilinear(const Vec3& p) const {
    Query q;
    Vec3 u = (p - box_.min).cwiseQuotient(h_);
    const Vec3 lim = Vec3::Constant(double(n_ - 1));
    if ((u.array() < 0.0).any() || (u.array() > lim.array()).any()) {
        q.clamped = true;
        u = u.cwiseMax(0.0).cwiseMin(lim);
    }
    int c[3];
    double t[3];
    for (int a = 0; a < 3; ++a) {
        // Node positions round-trip through min + i * h inexactly; snap them back.
        const double r = std::round(u[a]);
        if (std::abs(u[a] - r) < 1e-9) u[a] = r;
        c[a] = std::min(int(u[a]), n_ - 2);
        t[a] = u[a] - c[a];
    }
    const auto v = [&](int di, int dj, int dk) { return double(values_[index(c[0] + di, c[1] + dj, c[2] + dk)]); };
    const double x00 = v(0, 0, 0) + t[0] * (v(1, 0, 0) - v(0, 0, 0));
    const double x10 = v(0, 1, 0) + t[0] * (v(1, 1, 0) - v(0, 1, 0));
    const double x01 = v(0, 0, 1) + t[0] * (v(1, 0, 1) - v(0, 0, 1));
    const double x11 = v(0, 1, 1) + t[0] * (v(1, 1, 1) - v(0, 1, 1));
    const double y0 = x00 + t[1] * (x10 - x00);
    const double y1 = x01 + t[1] * (x11 - x01);
    q.value = y0 + t[2] * (y1 - y0);
    return q;
}

VoxelGrid::GradientQuery VoxelGrid::gradient(const Vec3& p) const {
    GradientQuery out;
    if (has_gradients()) {
        Vec3 u = (p - box_.min).cwiseQuotient(h_);
        const Vec3 lim = Vec3::Constant(double(n_ - 1));
        if ((u.array() < 0.0).any() || (u.array() > lim.array()).any()) out.one_sided = true;
        u = u.cwiseMax(0.0).cwiseMin(lim);
        int c[3];
        double t[3];
        for (int a = 0; a < 3; ++a) {
            c[a] = std::min(int(u[a]), n_ - 2);
            t[a] = u[a] - c[a];
        }
        Vec3 g = Vec3::Zero();
        for (int corner = 0; corner < 8; ++corner) {
            const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
            const double w = (di ? t[0] : 1 - t[0]) * (dj ? t[1] : 1 - t[1]) * (dk ? t[2] : 1 - t[2]);
            const float* s = &gradients_[3 * index(c[0] + di, c[1] + dj, c[2] + dk)];
            g += w * Vec3(s[0], s[1], s[2]);
        }
        const double len = g.norm();
        out.gradient = len > 0.0 ? Vec3(g / len) : Vec3::Zero();
        return out;
    }
    for (int a = 0; a < 3; ++a) {
        Vec3 lo = p, hi = p;
        lo[a] -= h_[a];
        hi[a] += h_[a];
        double span = 2.0 * h_[a];
        if (lo[a] < box_.min[a]) {
            lo[a] = p[a];
            span = h_[a];
            out.one_sided = true;
        } else if (hi[a] > box_.max[a]) {
            hi[a] = p[a];
            span = h_[a];
            out.one_sided = true;
        }
        out.gradient[a] = (query_trilinear(hi).value - query_trilinear(lo).value) / span;
    }
    return out;
}

VoxelGrid build_voxel_sdf(const MeshSdf& sdf, int resolution, bool with_gradients) {
    return build_voxel_sdf(sdf, padded_bounds(sdf.mesh()), resolution, with_gradients);
}

VoxelGrid build_voxel_sdf(const MeshSdf& sdf, const Aabb& box_in, int resolution, bool with_gradients) {
    if (resolution < 2) throw Error("voxel resolution must be at least 2");
    const int n = resolution;
    const Aabb box{round_to_float(box_in.min), round_to_float(box_in.max)};
    const Vec3 h = box.extent() / double(n - 1);
    std::vector<float> values(std::size_t(n) * n * n);
    std::size_t idx = 0;
    for (int k = 0; k < n; ++k) {
        for (int j = 0; j < n; ++j) {
            // Walking a row, the previous node's closest triangle bounds the search.
            std::uint32_t hint = sdf.query(box.min + Vec3(0, j, k).cwiseProduct(h)).hit.triangle;
            for (int i = 0; i < n; ++i) {
                const SignedHit s = sdf.query(box.min + Vec3(i, j, k).cwiseProduct(h), hint);
                hint = s.hit.triangle;
                values[idx++] = float(s.signed_distance);
            }
        }
    }
    std::vector<float> grads;
    if (with_gradients) {
        grads.resize(values.size() * 3);
        auto at = [&](int i, int j, int k) { return double(values[(std::size_t(k) * n + j) * n + i]); };
        for (int k = 0; k < n; ++k) {
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < n; ++i) {
                    const int c[3] = {i, j, k};
                    Vec3 g;
                    for (int a = 0; a < 3; ++a) {
                        int lo[3] = {i, j, k}, hi[3] = {i, j, k};
                        lo[a] = std::max(0, c[a] - 1);
                        hi[a] = std::min(n - 1, c[a] + 1);
                        g[a] = (at(hi[0], hi[1], hi[2]) - at(lo[0], lo[1], lo[2])) / (double(hi[a] - lo[a]) * h[a]);
                    }
                    const double len = g.norm();
                    if (len > 0.0) g /= len;
                    float* dst = &grads[3 * ((std::size_t(k) * n + j) * n + i)];
                    dst[0] = float(g.x());
                    dst[1] = float(g.y());
                    dst[2] = float(g.z());
                }
            }
        }
    }
    return VoxelGrid(n, box, std::move(values), std::move(grads));
}

void save_voxel_grid(const VoxelGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    io::write_magic(out, "VSDF");
    io::write_pod(out, kVoxelVersion);
    io::write_pod(out, std::uint32_t(grid.resolution()));
    for (int k = 0; k < 3; ++k) io::write_pod(out, float(grid.box().min[k]));
    for (int k = 0; k < 3; ++k) io::write_pod(out, float(grid.box().max[k]));
    io::write_pod(out, std::uint32_t(grid.has_gradients() ? 1 : 0));
    out.write(reinterpret_cast<const char*>(grid.values().data()), std::streamsize(grid.value_bytes()));
    if (grid.has_gradients())
        out.write(reinterpret_cast<const char*>(grid.gradients().data()),
                  std::streamsize(grid.gradients().size() * sizeof(float)));
    if (!out) throw Error("write failed for " + path.string());
}

VoxelGrid load_voxel_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open voxel grid " + path.string());
    io::expect_magic(in, "VSDF");
    if (const auto v = io::read_pod<std::uint32_t>(in, "version"); v != kVoxelVersion)
        throw FormatError("unsupported voxel grid version " + std::to_string(v));
    const auto n = io::read_pod<std::uint32_t>(in, "resolution");
    if (n < 2 || n > 4096) throw FormatError("implausible voxel resolution");
    Aabb box;
    for (int k = 0; k < 3; ++k) box.min[k] = io::read_pod<float>(in, "box");
    for (int k = 0; k < 3; ++k) box.max[k] = io::read_pod<float>(in, "box");
    const auto flags = io::read_pod<std::uint32_t>(in, "flags");
    const std::size_t count = std::size_t(n) * n * n;
    std::vector<float> values(count), grads;
    if (!in.read(reinterpret_cast<char*>(values.data()), std::streamsize(count * sizeof(float))))
        throw FormatError("voxel values truncated");
    if (flags & 1u) {
        grads.resize(3 * count);
        if (!in.read(reinterpret_cast<char*>(grads.data()), std::streamsize(grads.size() * sizeof(float))))
            throw FormatError("voxel gradients truncated");
    }
    return VoxelGrid(int(n), box, std::move(values), std::move(grads));
}

}  // namespace sdfkit
