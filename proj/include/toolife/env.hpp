#pragma once

// Planar object-moving task: a translating tool pushes a disk toward a goal
// under quasi-static Coulomb friction.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "toolife/fea.hpp"

namespace toolife::env {

using Vec2 = fea::Vec2;

inline constexpr double kGravity = 9.81;
inline constexpr int kObservationDim = 4;
inline constexpr int kActionDim = 2;

using Observation = std::array<double, kObservationDim>;

struct Range {
    double lo;
    double hi;
};

struct Box {
    double x0, y0, x1, y1;

    bool contains(const Vec2& p) const {
        return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
    }
    Vec2 clamp(const Vec2& p) const;
};

struct EnvConfig {
    Range friction{0.4, 0.6};
    Range object_mass{1.8, 2.2};  // kg
    int horizon = 20;              // steps per episode
    double max_step = 0.05;        // per-axis action bound, m
    double goal_radius = 0.05;     // m
    double alpha_dis = 0.1;
    double object_radius = 0.03;   // m
    Vec2 goal{0.25, 0.03};
    Vec2 tool_start{-0.20, 0.0};
    Box spawn{-0.02, 0.0, 0.04, 0.06};
    Box workspace{-0.5, -0.4, 0.6, 0.4};

    void validate() const;
};

struct EnvState {
    Vec2 tool_position;
    Vec2 object_position;
    Vec2 goal_position;
    int step_index = 0;
    // Per-episode randomized physics.
    double friction = 0.5;
    double object_mass = 2.0;

    friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct EnvAction {
    double dx;
    double dy;
};

/// Contact report for one step. Points are in the tool frame (mount at the
/// origin) so they map straight onto the tool mesh.
struct Contact {
    Vec2 point;
    Vec2 force;  // acting on the tool, N
};

struct StepOutcome {
    EnvState next_state;
    double task_reward = 0.0;
    std::optional<Contact> contact;
    bool done = false;
    bool success = false;
};

/// Tool outline derived from a mesh: boundary segments plus the triangles
/// for inside tests. Coordinates are in the tool frame.
class ToolShape {
public:
    explicit ToolShape(const fea::Mesh& mesh);

    struct Nearest {
        Vec2 point;       // closest boundary point, tool frame
        double distance;  // signed: negative when the query is inside the tool
    };

    Nearest nearest(const Vec2& p_tool) const;
    bool contains(const Vec2& p_tool) const;

private:
    std::vector<std::array<Vec2, 2>> segments_;
    std::vector<std::array<Vec2, 3>> triangles_;
};

/// Draws a fresh episode: object uniform in the spawn box, friction and mass
/// uniform in their ranges. Deterministic in `seed`.
EnvState reset(const EnvConfig& config, std::uint64_t seed);

Observation observe(const EnvState& state);

/// Axis-wise object-goal distances plus the weighted tool-object gap, negated.
double task_reward(const EnvState& state, const EnvConfig& config, const ToolShape& tool);

bool is_success(const EnvState& state, const EnvConfig& config);

EnvAction clamp_action(const EnvAction& action, const EnvConfig& config);

StepOutcome step(const EnvState& state, const EnvAction& action, const EnvConfig& config,
                 const ToolShape& tool);

/// Reaction on the tool while the object slides: magnitude mu*m*g along the
/// push normal, applied at the tool boundary point nearest the object
/// centre. Throws ContractError if the object did not move.
Contact contact_force(const EnvState& before, const EnvState& after, const EnvConfig& config,
                      const ToolShape& tool);

}  // namespace toolife::env
