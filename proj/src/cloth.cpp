#include "sdfkit/cloth.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace sdfkit {

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw Error("dt must be positive");
    if (!(damping >= 0.0 && damping < 1.0)) throw Error("damping must lie in [0, 1)");
    if (structural_stiffness < 0.0 || shear_stiffness < 0.0 || bend_stiffness < 0.0)
        throw Error("stiffness must be non-negative");
    if (max_substeps < 1) throw Error("max_substeps must be at least 1");
    if (steps < 0) throw Error("steps must be non-negative");
    if (frame_interval < 1) throw Error("frame_interval must be at least 1");
    collision.validate();
}

double SimConfig::stiffness(SpringKind k) const {
    switch (k) {
        case SpringKind::Structural: return structural_stiffness;
        case SpringKind::Shear: return shear_stiffness;
        case SpringKind::Bend: return bend_stiffness;
    }
    return 0.0;
}

ClothState init_cloth(int rows, int cols, double spacing, double mass_total, const std::vector<std::uint32_t>& pins,
                      const Vec3& origin) {
    if (rows < 2 || cols < 2) throw Error("cloth needs at least 2 x 2 vertices");
    if (!(spacing > 0.0)) throw Error("cloth spacing must be positive");
    if (!(mass_total > 0.0)) throw Error("cloth mass must be positive");
    ClothState s;
    s.rows = rows;
    s.cols = cols;
    const std::size_t n = std::size_t(rows) * cols;
    s.vertex_mass = mass_total / double(n);
    s.x.reserve(n);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            s.x.push_back(origin + Vec3((c - 0.5 * (cols - 1)) * spacing, 0.0, (r - 0.5 * (rows - 1)) * spacing));
    s.prev = s.x;

    auto id = [cols](int r, int c) { return std::uint32_t(r * cols + c); };
    auto add = [&](std::uint32_t a, std::uint32_t b, SpringKind kind) {
        s.springs.push_back({a, b, (s.x[a] - s.x[b]).norm(), kind});
    };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) add(id(r, c), id(r, c + 1), SpringKind::Structural);
            if (r + 1 < rows) add(id(r, c), id(r + 1, c), SpringKind::Structural);
        }
    }
    for (int r = 0; r + 1 < rows; ++r) {
        for (int c = 0; c + 1 < cols; ++c) {
            add(id(r, c), id(r + 1, c + 1), SpringKind::Shear);
            add(id(r, c + 1), id(r + 1, c), SpringKind::Shear);
        }
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c + 2 < cols) add(id(r, c), id(r, c + 2), SpringKind::Bend);
            if (r + 2 < rows) add(id(r, c), id(r + 2, c), SpringKind::Bend);
        }
    }
    for (const auto p : pins) {
        if (p >= n) throw Error("pin index " + std::to_string(p) + " out of range");
        s.pinned.push_back(p);
        s.pin_positions.push_back(s.x[p]);
    }
    return s;
}

int stable_substeps(const ClothState& state, const SimConfig& cfg) {
    // Explicit mass-spring stability: h < 2 sqrt(m / k), with k the total spring
    // stiffness at the stiffest vertex; half that bound is used as the target.
    std::vector<double> k_sum(state.vertex_count(), 0.0);
    for (const auto& s : state.springs) {
        const double k = cfg.stiffness(s.kind);
        k_sum[s.i] += k;
        k_sum[s.j] += k;
    }
    double k_max = 0.0;
    for (double k : k_sum) k_max = std::max(k_max, k);
    if (k_max <= 0.0) return 1;
    const double h_max = std::sqrt(state.vertex_mass / k_max);
    return std::max(1, int(std::ceil(cfg.dt / h_max)));
}

namespace {

// Linearized contact constraint n . x >= offset for a vertex that may reach the
// epsilon shell during the coming step, built from the field at the step start.
struct ContactPlane {
    std::uint32_t vertex;
    Vec3 normal;
    double offset;
};

std::vector<ContactPlane> contact_planes(const ClothState& state, const SimConfig& cfg, const SdfProvider& provider,
                                         int substeps) {
    const std::size_t n = state.vertex_count();
    std::vector<double> dist(n);
    std::vector<Vec3> grad(n);
    provider.distance_and_gradient(state.x, dist, grad);
    const double eps = cfg.collision.epsilon;
    const double fall = cfg.gravity.norm() * cfg.dt * cfg.dt;
    std::vector<ContactPlane> planes;
    for (std::size_t v = 0; v < n; ++v) {
        // Twice the distance covered at the current velocity, plus gravity's share.
        const double reach = 2.0 * substeps * (state.x[v] - state.prev[v]).norm() + fall;
        if (!(dist[v] < eps + reach)) continue;
        const double len = grad[v].norm();
        if (!(len >= 1e-8)) continue;
        const Vec3 nrm = grad[v] / len;
        planes.push_back({std::uint32_t(v), nrm, nrm.dot(state.x[v]) + eps - dist[v]});
    }
    return planes;
}

void pin(ClothState& state) {
    for (std::size_t k = 0; k < state.pinned.size(); ++k) {
        state.x[state.pinned[k]] = state.pin_positions[k];
        state.prev[state.pinned[k]] = state.pin_positions[k];
    }
}

}  // namespace

void step(ClothState& state, const SimConfig& cfg, const SdfProvider* provider) {
    const std::size_t n = state.vertex_count();
    const int substeps = std::min(cfg.max_substeps, stable_substeps(state, cfg));
    const double h = cfg.dt / substeps;
    const double h2 = h * h;
    // Same velocity loss per full step regardless of the substep count.
    const double keep = substeps == 1 ? 1.0 - cfg.damping : std::pow(1.0 - cfg.damping, 1.0 / substeps);
    const double inv_mass = 1.0 / state.vertex_mass;

    const std::vector<Vec3> start = state.x;
    const auto planes = provider ? contact_planes(state, cfg, *provider, substeps) : std::vector<ContactPlane>{};
    std::vector<Vec3> force(n);
    for (int sub = 0; sub < substeps; ++sub) {
        std::fill(force.begin(), force.end(), Vec3(cfg.gravity * state.vertex_mass));
        for (const auto& s : state.springs) {
            const Vec3 d = state.x[s.j] - state.x[s.i];
            const double len = d.norm();
            if (len <= 0.0) continue;
            const Vec3 f = cfg.stiffness(s.kind) * (len - s.rest_length) / len * d;
            force[s.i] += f;
            force[s.j] -= f;
        }
        for (std::size_t v = 0; v < n; ++v) {
            const Vec3 next = state.x[v] + keep * (state.x[v] - state.prev[v]) + (force[v] * inv_mass) * h2;
            state.prev[v] = state.x[v];
            state.x[v] = next;
        }
        // Substep contact keeps the stiff springs from absorbing a whole step of penetration at once.
        for (const auto& c : planes) {
            Vec3& x = state.x[c.vertex];
            const double gap = c.offset - c.normal.dot(x);
            if (gap > 0.0) x += gap * c.normal;
        }
        pin(state);
    }
    if (provider) {
        const std::vector<Vec3> integrated = state.x;
        resolve_in_place(*provider, state.x, cfg.collision);
        // A projected vertex restarts from the step-averaged velocity (x - start) / dt.
        // Keeping the last substep's history would turn the projection into a
        // velocity `substeps` times too large.
        for (std::size_t v = 0; v < n; ++v)
            if (state.x[v] != integrated[v]) state.prev[v] = state.x[v] - (state.x[v] - start[v]) / double(substeps);
    }
    pin(state);
    for (std::size_t v = 0; v < n; ++v) {
        if (!state.x[v].allFinite()) {
            std::ostringstream msg;
            msg << "cloth diverged: non-finite position at vertex " << v << " in step " << state.step_index;
            throw Error(msg.str());
        }
    }
    ++state.step_index;
}

void simulate(ClothState& state, const SimConfig& cfg, const SdfProvider* provider, const FrameSink& sink) {
    cfg.validate();
    int frame = 0;
    if (sink) sink(frame++, state);
    for (int s = 1; s <= cfg.steps; ++s) {
        step(state, cfg, provider);
        if (sink && s % cfg.frame_interval == 0) sink(frame++, state);
    }
}

void write_cloth_obj(const ClothState& state, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[128];
    for (const auto& v : state.x) {
        const int len = std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
        out.write(buf, len);
    }
    for (int r = 0; r + 1 < state.rows; ++r) {
        for (int c = 0; c + 1 < state.cols; ++c) {
            const int a = r * state.cols + c + 1;
            out << "f " << a << ' ' << a + state.cols << ' ' << a + state.cols + 1 << ' ' << a + 1 << '\n';
        }
    }
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace sdfkit
