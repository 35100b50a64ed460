// Run configuration as JSON. Every block is optional; missing keys keep
// their defaults, unknown keys are rejected so typos surface early.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "toolife/error.hpp"
#include "toolife/harness.hpp"

namespace toolife::harness {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void read_range(const json& obj, const char* key, env::Range& r, const std::string& where) {
    if (!obj.contains(key)) return;
    std::vector<double> v;
    read(obj, key, v, where);
    if (v.size() != 2) throw ConfigError(where + "." + key + " must be [lo, hi]");
    r = {v[0], v[1]};
}

void read_vec2(const json& obj, const char* key, fea::Vec2& p, const std::string& where) {
    if (!obj.contains(key)) return;
    std::vector<double> v;
    read(obj, key, v, where);
    if (v.size() != 2) throw ConfigError(where + "." + key + " must be [x, y]");
    p = {v[0], v[1]};
}

void read_box(const json& obj, const char* key, env::Box& b, const std::string& where) {
    if (!obj.contains(key)) return;
    std::vector<double> v;
    read(obj, key, v, where);
    if (v.size() != 4) throw ConfigError(where + "." + key + " must be [x0, y0, x1, y1]");
    b = {v[0], v[1], v[2], v[3]};
}

}  // namespace

void RunConfig::validate() const {
    env.validate();
    material.validate();
    try {
        sn_curve.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("fatigue: ") + e.what());
    }
    arn.validate();
    sac.validate();
    if (episodes < 0) throw ConfigError("episodes must be >= 0");
    if (replay_capacity < 1) throw ConfigError("replay_capacity must be positive");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (!std::isfinite(failed_tool_reward)) throw ConfigError("failed_tool_reward must be finite");
    if (sac.action_scale != env.max_step) throw ConfigError("sac.action_scale must equal env.max_step");
}

RunConfig config_from_json(const json& doc, const std::string& base_dir) {
    reject_unknown(doc,
                   {"schema_version", "variant", "episodes", "seed", "output_dir", "mesh", "replay_capacity",
                    "checkpoint_every", "failed_tool_reward", "eval_seed", "env", "material", "fatigue", "arn",
                    "sac"},
                   "config");
    if (!doc.contains("schema_version")) throw ConfigError("config has no schema_version");
    int version = 0;
    read(doc, "schema_version", version, "config");
    if (version != kConfigSchemaVersion) {
        throw ConfigError("config schema_version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kConfigSchemaVersion) + ")");
    }

    RunConfig c;
    std::string variant = reward::variant_name(c.variant);
    read(doc, "variant", variant, "config");
    c.variant = reward::parse_variant(variant);
    read(doc, "episodes", c.episodes, "config");
    read(doc, "seed", c.seed, "config");
    read(doc, "output_dir", c.output_dir, "config");
    read(doc, "replay_capacity", c.replay_capacity, "config");
    read(doc, "checkpoint_every", c.checkpoint_every, "config");
    read(doc, "failed_tool_reward", c.failed_tool_reward, "config");
    read(doc, "eval_seed", c.eval_seed, "config");
    if (doc.contains("mesh")) {
        read(doc, "mesh", c.mesh_path, "config");
        const std::filesystem::path p(c.mesh_path);
        if (p.is_relative()) c.mesh_path = (std::filesystem::path(base_dir) / p).lexically_normal().string();
    }

    if (doc.contains("env")) {
        const json& e = doc["env"];
        reject_unknown(e,
                       {"friction", "object_mass", "horizon", "max_step", "goal_radius", "alpha_dis",
                        "object_radius", "goal", "tool_start", "spawn", "workspace"},
                       "env");
        read_range(e, "friction", c.env.friction, "env");
        read_range(e, "object_mass", c.env.object_mass, "env");
        read(e, "horizon", c.env.horizon, "env");
        read(e, "max_step", c.env.max_step, "env");
        read(e, "goal_radius", c.env.goal_radius, "env");
        read(e, "alpha_dis", c.env.alpha_dis, "env");
        read(e, "object_radius", c.env.object_radius, "env");
        read_vec2(e, "goal", c.env.goal, "env");
        read_vec2(e, "tool_start", c.env.tool_start, "env");
        read_box(e, "spawn", c.env.spawn, "env");
        read_box(e, "workspace", c.env.workspace, "env");
    }
    if (doc.contains("material")) {
        const json& m = doc["material"];
        reject_unknown(m, {"youngs_modulus", "poisson_ratio", "thickness"}, "material");
        read(m, "youngs_modulus", c.material.youngs_modulus, "material");
        read(m, "poisson_ratio", c.material.poisson_ratio, "material");
        read(m, "thickness", c.material.thickness, "material");
    }
    if (doc.contains("fatigue")) {
        const json& f = doc["fatigue"];
        reject_unknown(f, {"sn_a", "sn_b", "count_residual_half_cycles"}, "fatigue");
        read(f, "sn_a", c.sn_curve.a, "fatigue");
        read(f, "sn_b", c.sn_curve.b, "fatigue");
        read(f, "count_residual_half_cycles", c.count_residual_half_cycles, "fatigue");
    }
    if (doc.contains("arn")) {
        const json& a = doc["arn"];
        reject_unknown(a, {"beta", "alpha_s", "gamma_b", "rul_cap", "buffer_capacity", "clamp_life_reward"}, "arn");
        read(a, "beta", c.arn.beta, "arn");
        read(a, "alpha_s", c.arn.alpha_s, "arn");
        read(a, "gamma_b", c.arn.gamma_b, "arn");
        read(a, "rul_cap", c.arn.rul_cap, "arn");
        read(a, "buffer_capacity", c.arn.buffer_capacity, "arn");
        read(a, "clamp_life_reward", c.arn.clamp_life_reward, "arn");
    }
    if (doc.contains("sac")) {
        const json& s = doc["sac"];
        reject_unknown(s,
                       {"hidden", "gamma", "tau", "actor_lr", "critic_lr", "alpha_lr", "batch_size", "auto_alpha",
                        "initial_alpha", "target_entropy", "gradient_steps", "warmup_steps"},
                       "sac");
        read(s, "hidden", c.sac.hidden, "sac");
        read(s, "gamma", c.sac.gamma, "sac");
        read(s, "tau", c.sac.tau, "sac");
        read(s, "actor_lr", c.sac.actor_lr, "sac");
        read(s, "critic_lr", c.sac.critic_lr, "sac");
        read(s, "alpha_lr", c.sac.alpha_lr, "sac");
        read(s, "batch_size", c.sac.batch_size, "sac");
        read(s, "auto_alpha", c.sac.auto_alpha, "sac");
        read(s, "initial_alpha", c.sac.initial_alpha, "sac");
        read(s, "target_entropy", c.sac.target_entropy, "sac");
        read(s, "gradient_steps", c.sac.gradient_steps, "sac");
        read(s, "warmup_steps", c.sac.warmup_steps, "sac");
    }
    c.sac.action_scale = c.env.max_step;
    c.validate();
    return c;
}

json config_to_json(const RunConfig& c) {
    const auto& e = c.env;
    return json{
        {"schema_version", kConfigSchemaVersion},
        {"variant", reward::variant_name(c.variant)},
        {"episodes", c.episodes},
        {"seed", c.seed},
        {"output_dir", c.output_dir},
        {"mesh", c.mesh_path},
        {"replay_capacity", c.replay_capacity},
        {"checkpoint_every", c.checkpoint_every},
        {"failed_tool_reward", c.failed_tool_reward},
        {"eval_seed", c.eval_seed},
        {"env",
         {{"friction", {e.friction.lo, e.friction.hi}},
          {"object_mass", {e.object_mass.lo, e.object_mass.hi}},
          {"horizon", e.horizon},
          {"max_step", e.max_step},
          {"goal_radius", e.goal_radius},
          {"alpha_dis", e.alpha_dis},
          {"object_radius", e.object_radius},
          {"goal", {e.goal.x(), e.goal.y()}},
          {"tool_start", {e.tool_start.x(), e.tool_start.y()}},
          {"spawn", {e.spawn.x0, e.spawn.y0, e.spawn.x1, e.spawn.y1}},
          {"workspace", {e.workspace.x0, e.workspace.y0, e.workspace.x1, e.workspace.y1}}}},
        {"material",
         {{"youngs_modulus", c.material.youngs_modulus},
          {"poisson_ratio", c.material.poisson_ratio},
          {"thickness", c.material.thickness}}},
        {"fatigue",
         {{"sn_a", c.sn_curve.a}, {"sn_b", c.sn_curve.b}, {"count_residual_half_cycles", c.count_residual_half_cycles}}},
        {"arn",
         {{"beta", c.arn.beta},
          {"alpha_s", c.arn.alpha_s},
          {"gamma_b", c.arn.gamma_b},
          {"rul_cap", c.arn.rul_cap},
          {"buffer_capacity", c.arn.buffer_capacity},
          {"clamp_life_reward", c.arn.clamp_life_reward}}},
        {"sac",
         {{"hidden", c.sac.hidden},
          {"gamma", c.sac.gamma},
          {"tau", c.sac.tau},
          {"actor_lr", c.sac.actor_lr},
          {"critic_lr", c.sac.critic_lr},
          {"alpha_lr", c.sac.alpha_lr},
          {"batch_size", c.sac.batch_size},
          {"auto_alpha", c.sac.auto_alpha},
          {"initial_alpha", c.sac.initial_alpha},
          {"target_entropy", c.sac.target_entropy},
          {"gradient_steps", c.sac.gradient_steps},
          {"warmup_steps", c.sac.warmup_steps}}},
    };
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    const std::string base = std::filesystem::path(path).parent_path().string();
    return config_from_json(doc, base.empty() ? "." : base);
}

std::string config_hash(const RunConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : config_to_json(config).dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace toolife::harness
