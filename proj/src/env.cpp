#include "toolife/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toolife/error.hpp"

namespace toolife::env {

namespace {

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
double unit_uniform(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_uniform(next()); }

private:
    std::uint64_t state_;
};

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

Vec2 closest_on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return a + t * ab;
}

bool in_triangle(const std::array<Vec2, 3>& t, const Vec2& p) {
    auto cross = [](const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); };
    const double d1 = cross(t[1] - t[0], p - t[0]);
    const double d2 = cross(t[2] - t[1], p - t[1]);
    const double d3 = cross(t[0] - t[2], p - t[2]);
    const bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
    const bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
    return !(has_neg && has_pos);
}

// Moves the object out of the tool so the gap is zero. Returns true if the
// object was displaced.
bool resolve_penetration(EnvState& s, const EnvConfig& cfg, const ToolShape& tool,
                         const Vec2& motion) {
    bool moved = false;
    for (int iter = 0; iter < 4; ++iter) {
        const Vec2 local = s.object_position - s.tool_position;
        const ToolShape::Nearest near = tool.nearest(local);
        if (near.distance >= cfg.object_radius) {
            break;
        }
        Vec2 normal = local - near.point;
        const double len = normal.norm();
        if (len > 1e-12) {
            normal /= len;
            if (near.distance < 0.0) normal = -normal;
        } else {
            normal = motion.norm() > 0.0 ? Vec2(motion.normalized()) : Vec2(1.0, 0.0);
        }
        const Vec2 target = s.tool_position + near.point + cfg.object_radius * normal;
        const Vec2 clamped = cfg.workspace.clamp(target);
        if (clamped == s.object_position) {
            break;
        }
        s.object_position = clamped;
        moved = true;
    }
    return moved;
}

}  // namespace

Vec2 Box::clamp(const Vec2& p) const {
    return {std::clamp(p.x(), x0, x1), std::clamp(p.y(), y0, y1)};
}

void EnvConfig::validate() const {
    auto range_ok = [](const Range& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; };
    if (!range_ok(friction) || friction.lo < 0.0) throw ConfigError("friction range is empty or negative");
    if (!range_ok(object_mass) || object_mass.lo <= 0.0) throw ConfigError("object mass range is empty or non-positive");
    if (horizon < 1) throw ConfigError("horizon must be at least one step");
    if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
    if (!(goal_radius > 0.0)) throw ConfigError("goal_radius must be positive");
    if (!(alpha_dis >= 0.0)) throw ConfigError("alpha_dis must be non-negative");
    if (!(object_radius > 0.0)) throw ConfigError("object_radius must be positive");
    if (!(spawn.x0 <= spawn.x1 && spawn.y0 <= spawn.y1)) throw ConfigError("spawn region is empty");
    if (!(workspace.x0 < workspace.x1 && workspace.y0 < workspace.y1)) throw ConfigError("workspace is empty");
    if (!workspace.contains({spawn.x0, spawn.y0}) || !workspace.contains({spawn.x1, spawn.y1})) {
        throw ConfigError("spawn region must lie inside the workspace");
    }
    if (!workspace.contains(goal) || !workspace.contains(tool_start)) {
        throw ConfigError("goal and tool start must lie inside the workspace");
    }
}

ToolShape::ToolShape(const fea::Mesh& mesh) {
    for (const auto& e : fea::boundary_edges(mesh)) {
        segments_.push_back({mesh.nodes[e[0]], mesh.nodes[e[1]]});
    }
    for (const auto& t : mesh.elements) {
        triangles_.push_back({mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]});
    }
    if (segments_.empty()) {
        throw MeshError("tool mesh has no boundary");
    }
}

bool ToolShape::contains(const Vec2& p) const {
    return std::any_of(triangles_.begin(), triangles_.end(),
                       [&](const auto& t) { return in_triangle(t, p); });
}

ToolShape::Nearest ToolShape::nearest(const Vec2& p) const {
    Nearest best{Vec2::Zero(), std::numeric_limits<double>::infinity()};
    for (const auto& seg : segments_) {
        const Vec2 q = closest_on_segment(seg[0], seg[1], p);
        const double d = (p - q).norm();
        if (d < best.distance) {
            best = {q, d};
        }
    }
    if (contains(p)) {
        best.distance = -best.distance;
    }
    return best;
}

EnvState reset(const EnvConfig& config, std::uint64_t seed) {
    config.validate();
    SplitMix64 rng(seed);
    EnvState s;
    s.tool_position = config.tool_start;
    s.goal_position = config.goal;
    const double x = rng.uniform(config.spawn.x0, config.spawn.x1);
    const double y = rng.uniform(config.spawn.y0, config.spawn.y1);
    s.object_position = {x, y};
    s.friction = rng.uniform(config.friction.lo, config.friction.hi);
    s.object_mass = rng.uniform(config.object_mass.lo, config.object_mass.hi);
    s.step_index = 0;
    return s;
}

Observation observe(const EnvState& s) {
    const Vec2 rel_object = s.object_position - s.tool_position;
    const Vec2 rel_goal = s.goal_position - s.object_position;
    return {rel_object.x(), rel_object.y(), rel_goal.x(), rel_goal.y()};
}

double task_reward(const EnvState& s, const EnvConfig& cfg, const ToolShape& tool) {
    const double dx = std::abs(s.object_position.x() - s.goal_position.x());
    const double dy = std::abs(s.object_position.y() - s.goal_position.y());
    const double gap = std::max(0.0, tool.nearest(s.object_position - s.tool_position).distance -
                                         cfg.object_radius);
    return -(dx + dy + cfg.alpha_dis * gap);
}

bool is_success(const EnvState& s, const EnvConfig& cfg) {
    return (s.object_position - s.goal_position).norm() <= cfg.goal_radius;
}

EnvAction clamp_action(const EnvAction& a, const EnvConfig& cfg) {
    return {std::clamp(a.dx, -cfg.max_step, cfg.max_step), std::clamp(a.dy, -cfg.max_step, cfg.max_step)};
}

StepOutcome step(const EnvState& state, const EnvAction& action, const EnvConfig& cfg,
                 const ToolShape& tool) {
    if (!finite(state.tool_position) || !finite(state.object_position) ||
        !finite(state.goal_position) || !std::isfinite(action.dx) || !std::isfinite(action.dy)) {
        throw DataError("environment step received a non-finite state or action");
    }
    if (state.step_index < 0 || state.step_index >= cfg.horizon) {
        throw ContractError("step called on a finished episode");
    }
    const EnvAction a = clamp_action(action, cfg);
    const Vec2 delta(a.dx, a.dy);
    const int substeps = std::max(1, static_cast<int>(std::ceil(delta.norm() / (0.25 * cfg.object_radius))));

    StepOutcome out;
    out.next_state = state;
    EnvState& next = out.next_state;
    bool pushed = false;
    for (int k = 0; k < substeps; ++k) {
        const Vec2 before = next.tool_position;
        next.tool_position = cfg.workspace.clamp(next.tool_position + delta / substeps);
        pushed |= resolve_penetration(next, cfg, tool, next.tool_position - before);
    }
    next.step_index = state.step_index + 1;

    if (pushed && next.object_position != state.object_position) {
        out.contact = contact_force(state, next, cfg, tool);
    }
    out.task_reward = task_reward(next, cfg, tool);
    out.success = is_success(next, cfg);
    out.done = out.success || next.step_index >= cfg.horizon;
    return out;
}

Contact contact_force(const EnvState& before, const EnvState& after,
                      [[maybe_unused]] const EnvConfig& cfg, const ToolShape& tool) {
    if (after.object_position == before.object_position) {
        throw ContractError("contact_force called for a step without object motion");
    }
    const Vec2 local = after.object_position - after.tool_position;
    const ToolShape::Nearest near = tool.nearest(local);
    Vec2 normal = local - near.point;
    if (normal.norm() > 1e-12) {
        normal.normalize();
    } else {
        normal = (after.object_position - before.object_position).normalized();
    }
    const double magnitude = after.friction * after.object_mass * kGravity;
    return {near.point, -magnitude * normal};
}

}  // namespace toolife::env
