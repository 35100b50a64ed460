#pragma once

// End-to-end orchestration: rollouts with per-step stress sampling,
// episode-end RUL and backfill, adaptive bounds, SAC training, evaluation
// and per-element life analysis.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toolife/agent.hpp"
#include "toolife/checkpoint.hpp"
#include "toolife/env.hpp"
#include "toolife/fatigue.hpp"
#include "toolife/fea.hpp"
#include "toolife/reward.hpp"

namespace toolife::harness {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
    env::EnvConfig env;
    std::string mesh_path;
    fea::Material material{2.0e9, 0.35, 0.006};
    fatigue::SnCurve sn_curve{1.0e31, 5.0};
    bool count_residual_half_cycles = true;
    reward::ArnConfig arn;
    agent::SacParams sac;
    reward::Variant variant = reward::Variant::kOurs;
    int episodes = 2500;
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";
    std::size_t replay_capacity = 100000;
    int checkpoint_every = 100;  // episodes between checkpoints; 0 writes only the final one
    double failed_tool_reward = -10.0;  // static life reward when eta <= 0
    std::uint64_t eval_seed = 1000003;  // first reset seed used by evaluate/analyze

    /// Range checks on every block; ConfigError on failure. Does not touch
    /// the file system.
    void validate() const;
};

/// Parses a config document. Relative mesh paths are resolved against
/// `base_dir`. Unknown keys and a wrong schema_version are ConfigErrors.
RunConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);

/// FNV-1a over the canonical JSON text, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Mixes a base seed with a stream index (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Reference rake: a shaft clamped at x = 0, a stocky head, and a thin
/// arm rising from the head. 5 mm grid.
fea::Mesh rake_tool_mesh();

/// Tool geometry, stiffness factorization and the contact-to-load mapping.
class ToolModel {
public:
    ToolModel(fea::Mesh mesh, const fea::Material& material);

    const fea::Mesh& mesh() const { return solver_.mesh(); }
    const env::ToolShape& shape() const { return shape_; }
    const fea::StaticSolver& solver() const { return solver_; }
    const fea::Vec2& mount() const { return mount_; }

    /// Point load at the free boundary node nearest the contact point.
    fea::LoadCase load_case(const env::Contact& contact) const;
    fea::StressField stress(const std::optional<env::Contact>& contact) const;

    /// |r x F| about the centroid of the fixed nodes.
    double torque(const env::Contact& contact) const;

private:
    fea::StaticSolver solver_;
    env::ToolShape shape_;
    std::vector<int> free_boundary_;
    fea::Vec2 mount_;
};

struct StepRecord {
    int step = 0;
    agent::Act action{};
    fea::Vec2 tool_position;
    fea::Vec2 object_position;
    double task_reward = 0.0;
    std::optional<env::Contact> contact;
};

struct EpisodeResult {
    std::vector<StepRecord> trajectory;
    fatigue::StressHistory history;
    fatigue::RulEstimate rul;
    bool success = false;
    int length = 0;
    double task_return = 0.0;
    double final_distance = 0.0;
    double max_torque = 0.0;
    std::string fault;  // non-empty when the FEA solve failed mid-episode

    reward::EpisodeSummary summary() const;
};

using Policy = std::function<agent::Act(const env::Observation&)>;
using StepHook = std::function<void(const agent::Transition&)>;

/// One rollout. The stress history starts and ends with an unloaded
/// (all-zero) sample around one sample per control step.
EpisodeResult run_episode(const Policy& policy, const env::EnvConfig& env_config, std::uint64_t reset_seed,
                          const ToolModel& tool, const fatigue::SnCurve& curve,
                          const fatigue::FatigueOptions& options, long episode_id = 0, const StepHook& hook = {});

void write_trajectory_csv(std::ostream& out, const EpisodeResult& episode);

struct EpisodeRecord {
    long episode = 0;
    bool success = false;
    double tool_rul = 0.0;  // capped at arn.rul_cap
    double task_return = 0.0;
    double final_distance = 0.0;
    double max_torque = 0.0;
    int steps = 0;
    std::size_t weakest_element = 0;
    std::optional<reward::NormBounds> bounds;  // in force after this episode
};

std::string episode_csv_header();
std::string episode_csv_row(const EpisodeRecord& r);

struct TrainOptions {
    bool resume = false;         // continue from output_dir/checkpoint.bin
    int stop_after_episodes = -1;  // halt early (after checkpointing) once this many episodes exist
    std::ostream* log = nullptr;
};

struct TrainResult {
    std::vector<EpisodeRecord> records;  // episodes run by this call
    std::string checkpoint_path;
};

/// Writes episodes.csv, timing.csv, manifest.json and checkpoint.bin into
/// config.output_dir.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

/// Trained policy plus everything needed to roll it out.
struct LoadedRun {
    RunConfig config;
    std::shared_ptr<const ToolModel> tool;  // not movable: holds a factorization
    std::optional<agent::Sac> sac;
    long episodes_done = 0;
};

LoadedRun load_run(const checkpoint::Checkpoint& ckpt);

struct TrialRecord {
    int trial = 0;
    bool success = false;
    double tool_rul = 0.0;  // capped
    double final_distance = 0.0;
    double max_torque = 0.0;
};

struct EvalSummary {
    std::string label;
    int trials = 0;
    double rul_mean = 0.0;
    double rul_std = 0.0;
    double success_rate = 0.0;
    double distance_mean = 0.0;
    double distance_std = 0.0;
    std::vector<TrialRecord> detail;
};

/// Deterministic-policy rollouts with reset seeds eval_seed, eval_seed+1, ...
EvalSummary evaluate(LoadedRun& run, int n_trials, std::optional<std::uint64_t> eval_seed = std::nullopt);

/// Rows in order; the multiplier column is relative to the row labelled
/// "baseline" when present, otherwise the first row.
void write_eval_csv(std::ostream& out, const std::vector<EvalSummary>& rows);
void write_eval_svg(std::ostream& out, const std::vector<EvalSummary>& rows);

struct StressAnalysis {
    EpisodeResult episode;
    std::vector<double> element_rul;  // capped
    std::vector<double> damage;
    std::size_t weakest_element = 0;
};

StressAnalysis analyze_stress(LoadedRun& run, std::optional<std::uint64_t> seed = std::nullopt);

void write_heatmap_csv(std::ostream& out, const StressAnalysis& analysis);
void write_heatmap_svg(std::ostream& out, const fea::Mesh& mesh, const std::vector<double>& element_rul);

}  // namespace toolife::harness
