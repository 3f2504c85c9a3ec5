#pragma once

#include "sdfkit/collision.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace sdfkit {

enum class SpringKind : std::uint8_t { Structural, Shear, Bend };

struct Spring {
    std::uint32_t i = 0, j = 0;
    double rest_length = 0.0;
    SpringKind kind = SpringKind::Structural;
};

struct ClothState {
    int rows = 0, cols = 0;
    std::vector<Vec3> x;     // current positions
    std::vector<Vec3> prev;  // positions one step earlier
    std::vector<Spring> springs;
    std::vector<std::uint32_t> pinned;
    std::vector<Vec3> pin_positions;
    double vertex_mass = 0.0;
    long step_index = 0;

    std::size_t vertex_count() const { return x.size(); }
};

struct SimConfig {
    double dt = 1.0 / 300.0;                // seconds per step
    Vec3 gravity = Vec3(0.0, -9.81, 0.0);   // length units / s^2
    double damping = 0.01;                  // fraction of velocity removed per step, in [0, 1)
    double structural_stiffness = 5000.0;   // N/m
    double shear_stiffness = 500.0;
    double bend_stiffness = 50.0;
    int max_substeps = 128;  // upper bound on the stability-driven substep count
    int steps = 500;
    int frame_interval = 10;  // simulate(): emit every k-th step
    CollisionConfig collision;

    void validate() const;
    double stiffness(SpringKind k) const;
};

// rows x cols vertices in the plane y = origin.y, centered on origin, at rest.
// Structural (4-neighbour), shear (diagonal) and bend (two apart) springs.
ClothState init_cloth(int rows, int cols, double spacing, double mass_total, const std::vector<std::uint32_t>& pins = {},
                      const Vec3& origin = Vec3::Zero());

// Integration substeps the stability heuristic asks for at cfg.dt (before the cap).
int stable_substeps(const ClothState& state, const SimConfig& cfg);

// One Verlet step (possibly substepped), then collision projection against
// `provider` (may be null), then pins. Projected vertices keep the pre-collision
// step start as history, so contact is inelastic. Throws on non-finite positions.
void step(ClothState& state, const SimConfig& cfg, const SdfProvider* provider);

using FrameSink = std::function<void(int frame, const ClothState& state)>;

// Emits the initial state as frame 0, then every cfg.frame_interval-th step.
void simulate(ClothState& state, const SimConfig& cfg, const SdfProvider* provider, const FrameSink& sink);

// Grid vertices in row-major order with quad faces.
void write_cloth_obj(const ClothState& state, const std::filesystem::path& path);

}  // namespace sdfkit
