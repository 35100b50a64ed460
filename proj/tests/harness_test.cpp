#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "toolife/error.hpp"
#include "toolife/harness.hpp"

using namespace toolife;
using namespace toolife::harness;
namespace fs = std::filesystem;

namespace {

const std::string kDefaultConfig = std::string(TOOLIFE_SOURCE_DIR) + "/configs/default.json";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("toolife_harness_test_" + name);
    fs::remove_all(p);
    return p;
}

RunConfig small_config(const std::string& name, int episodes) {
    RunConfig c = load_config(kDefaultConfig);
    c.episodes = episodes;
    c.sac.warmup_steps = 60;
    c.checkpoint_every = 0;
    c.output_dir = scratch(name).string();
    return c;
}

const ToolModel& rake() {
    static const ToolModel tool(rake_tool_mesh(), fea::Material{2.0e9, 0.35, 0.006});
    return tool;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

// Moves straight back into the workspace corner; never reaches the object.
agent::Act retreat(const env::Observation&) { return {-1.0, 0.0}; }

// Lines the stocky head up behind the object, then pushes along +x.
agent::Act scripted_push(const env::Observation& o) {
    const double a = 0.05;
    const double y_err = o[1] + 0.01;  // aim the contact 1 cm below the mount axis
    const double dy = std::clamp(y_err, -a, a);
    const double dx = std::abs(y_err) < 0.005 ? a : std::clamp(o[0] - 0.17, -a, a);
    return {dx, dy};
}

const fatigue::FatigueOptions kResiduals{true};
const fatigue::SnCurve kCurve{1.0e31, 5.0};

}  // namespace

// ---------------------------------------------------------------------------
// Config

TEST(Config, DefaultFileLoadsAndRoundTrips) {
    const RunConfig c = load_config(kDefaultConfig);
    EXPECT_EQ(c.episodes, 2500);
    EXPECT_EQ(c.env.horizon, 20);
    EXPECT_EQ(c.sac.batch_size, 32);
    EXPECT_EQ(c.sac.gamma, 0.99);
    EXPECT_EQ(c.arn.beta, 5.0);
    EXPECT_EQ(c.arn.alpha_s, 0.2);
    EXPECT_EQ(c.arn.gamma_b, 0.95);
    EXPECT_EQ(c.arn.buffer_capacity, 500u);
    EXPECT_TRUE(fs::exists(c.mesh_path));
    const RunConfig back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    nlohmann::json doc = config_to_json(load_config(kDefaultConfig));
    {
        auto d = doc;
        d["sac"]["learning_rate"] = 0.1;
        EXPECT_THROW(config_from_json(d), ConfigError);
    }
    {
        auto d = doc;
        d["schema_version"] = 2;
        EXPECT_THROW(config_from_json(d), ConfigError);
    }
    {
        auto d = doc;
        d.erase("schema_version");
        EXPECT_THROW(config_from_json(d), ConfigError);
    }
    {
        auto d = doc;
        d["variant"] = "greedy";
        EXPECT_THROW(config_from_json(d), ConfigError);
    }
    {
        auto d = doc;
        d["env"]["horizon"] = 0;
        EXPECT_THROW(config_from_json(d), ConfigError);
    }
    {
        auto d = doc;
        d["env"]["goal"] = {0.1};
        EXPECT_THROW(config_from_json(d), ConfigError);
    }
    {
        auto d = doc;
        d["episodes"] = "many";
        EXPECT_THROW(config_from_json(d), ConfigError);
    }
}

TEST(Config, AcceptsEveryVariant) {
    nlohmann::json doc = config_to_json(load_config(kDefaultConfig));
    for (const char* v : {"ours", "baseline", "ours_no_arn", "torque"}) {
        doc["variant"] = v;
        EXPECT_EQ(reward::variant_name(config_from_json(doc).variant), v);
    }
}

TEST(Config, MissingMeshIsReportedBeforeAnyEpisode) {
    RunConfig c = small_config("missing_mesh", 1);
    c.mesh_path = "/nonexistent/tool.mesh";
    EXPECT_THROW(train(c), ConfigError);
    EXPECT_FALSE(fs::exists(fs::path(c.output_dir) / "episodes.csv"));
}

TEST(Config, DerivedSeedsDiffer) {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t base : {0ull, 1ull}) {
        for (std::uint64_t s = 0; s < 4; ++s) seeds.push_back(derive_seed(base, s));
    }
    std::sort(seeds.begin(), seeds.end());
    EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
    EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

// ---------------------------------------------------------------------------
// Tool model

TEST(ToolModel, NoContactGivesZeroStress) {
    const auto field = rake().stress(std::nullopt);
    ASSERT_EQ(field.size(), rake().mesh().element_count());
    EXPECT_TRUE(std::all_of(field.begin(), field.end(), [](double s) { return s == 0.0; }));
}

TEST(ToolModel, LoadGoesToNearestFreeBoundaryNode) {
    const env::Contact c{{0.12, -0.0175}, {-10.0, 0.0}};
    const fea::LoadCase lc = rake().load_case(c);
    ASSERT_EQ(lc.point_loads.size(), 1u);
    const auto& node = rake().mesh().nodes[static_cast<std::size_t>(lc.point_loads[0].node)];
    EXPECT_NEAR(node.x(), 0.12, 1e-12);
    EXPECT_LE(std::abs(node.y() + 0.0175), 0.0025 + 1e-12);
    EXPECT_EQ(lc.point_loads[0].fx, -10.0);
    // Contact near the clamp still loads a free node.
    const auto& fixed = rake().mesh().fixed_nodes;
    const int n = rake().load_case({{0.0, 0.015}, {0.0, -1.0}}).point_loads[0].node;
    EXPECT_EQ(std::find(fixed.begin(), fixed.end(), n), fixed.end());
}

TEST(ToolModel, TorqueAboutFixedCentroid) {
    double mx = 0.0, my = 0.0;
    for (int n : rake().mesh().fixed_nodes) {
        mx += rake().mesh().nodes[static_cast<std::size_t>(n)].x();
        my += rake().mesh().nodes[static_cast<std::size_t>(n)].y();
    }
    mx /= static_cast<double>(rake().mesh().fixed_nodes.size());
    my /= static_cast<double>(rake().mesh().fixed_nodes.size());
    const env::Contact c{{0.12, 0.05}, {-10.0, 2.0}};
    const double expected = std::abs((0.12 - mx) * 2.0 - (0.05 - my) * -10.0);
    EXPECT_NEAR(rake().torque(c), expected, 1e-12);
}

TEST(ToolModel, ArmContactIsMoreDamagingThanHeadContact) {
    const auto head = rake().stress(env::Contact{{0.12, -0.0175}, {-9.81, 0.0}});
    const auto arm = rake().stress(env::Contact{{0.12, 0.075}, {-9.81, 0.0}});
    EXPECT_GT(*std::max_element(arm.begin(), arm.end()), 5.0 * *std::max_element(head.begin(), head.end()));
}

// ---------------------------------------------------------------------------
// Rollouts

TEST(RunEpisode, NoContactMeansInfiniteLifeAndFailure) {
    const env::EnvConfig cfg;
    const EpisodeResult r = run_episode(retreat, cfg, 5, rake(), kCurve, kResiduals);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.length, cfg.horizon);
    EXPECT_EQ(r.rul.tool_rul, std::numeric_limits<double>::infinity());
    EXPECT_EQ(r.max_torque, 0.0);
    EXPECT_EQ(r.history.sample_count(), static_cast<std::size_t>(cfg.horizon + 2));
    for (std::size_t e = 0; e < r.history.element_count(); ++e) {
        for (double s : r.history.element(e)) ASSERT_EQ(s, 0.0);
    }
    for (const auto& step : r.trajectory) EXPECT_FALSE(step.contact.has_value());
}

TEST(RunEpisode, ScriptedPushSucceedsWithFiniteLife) {
    const env::EnvConfig cfg;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const EpisodeResult r = run_episode(scripted_push, cfg, seed, rake(), kCurve, kResiduals);
        EXPECT_TRUE(r.success) << "seed " << seed;
        EXPECT_LT(r.length, cfg.horizon);
        EXPECT_TRUE(std::isfinite(r.rul.tool_rul));
        EXPECT_GT(r.rul.tool_rul, 0.0);
        EXPECT_LE(r.final_distance, cfg.goal_radius);
        EXPECT_GT(r.max_torque, 0.0);
        EXPECT_EQ(r.history.sample_count(), static_cast<std::size_t>(r.length + 2));
        EXPECT_TRUE(r.fault.empty());
    }
}

TEST(RunEpisode, SameSeedSameStressHistory) {
    const env::EnvConfig cfg;
    const EpisodeResult a = run_episode(scripted_push, cfg, 11, rake(), kCurve, kResiduals);
    const EpisodeResult b = run_episode(scripted_push, cfg, 11, rake(), kCurve, kResiduals);
    EXPECT_TRUE(a.history == b.history);
    EXPECT_EQ(a.rul.tool_rul, b.rul.tool_rul);
}

TEST(RunEpisode, HookSeesEveryTransitionInOrder) {
    const env::EnvConfig cfg;
    std::vector<agent::Transition> seen;
    const EpisodeResult r = run_episode(scripted_push, cfg, 3, rake(), kCurve, kResiduals, 42,
                                        [&](const agent::Transition& t) { seen.push_back(t); });
    ASSERT_EQ(seen.size(), static_cast<std::size_t>(r.length));
    for (std::size_t i = 0; i < seen.size(); ++i) {
        EXPECT_EQ(seen[i].t, static_cast<int>(i));
        EXPECT_EQ(seen[i].episode_id, 42);
        EXPECT_EQ(seen[i].task_reward, r.trajectory[i].task_reward);
        EXPECT_EQ(seen[i].done, r.success && i + 1 == seen.size());
    }
    for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_EQ(seen[i].state, seen[i - 1].next_state);
}

TEST(RunEpisode, TrajectoryCsvLayout) {
    const EpisodeResult r = run_episode(scripted_push, env::EnvConfig{}, 2, rake(), kCurve, kResiduals);
    std::ostringstream out;
    write_trajectory_csv(out, r);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step,tool_x,tool_y,obj_x,obj_y,reward,contact_fx,contact_fy");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
        ++rows;
    }
    EXPECT_EQ(rows, r.length);
}

// ---------------------------------------------------------------------------
// Training

TEST(Train, SingleEpisodeSmokeRun) {
    const RunConfig c = small_config("smoke", 1);
    const TrainResult r = train(c);
    ASSERT_EQ(r.records.size(), 1u);
    const fs::path dir(c.output_dir);
    EXPECT_EQ(read_csv(dir / "episodes.csv").size(), 1u);
    EXPECT_TRUE(fs::exists(dir / "checkpoint.bin"));
    EXPECT_TRUE(fs::exists(dir / "timing.csv"));
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], config_hash(c));
    EXPECT_EQ(manifest["seed"], c.seed);
    EXPECT_EQ(manifest["episodes_completed"], 1);
}

TEST(Train, LogHasOneRowPerEpisodeAndBoundsFollowSuccesses) {
    RunConfig c = small_config("log", 40);
    c.arn.buffer_capacity = 6;
    const TrainResult r = train(c);
    const auto rows = read_csv(fs::path(c.output_dir) / "episodes.csv");
    ASSERT_EQ(rows.size(), 40u);
    ASSERT_EQ(r.records.size(), 40u);

    // Replaying the logged successes through a fresh normalizer reproduces
    // the logged bounds exactly.
    reward::AdaptiveNormalizer norm(c.arn);
    int successes = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(std::stol(rows[i][0]), static_cast<long>(i));
        const bool ok = rows[i][1] == "1";
        successes += ok ? 1 : 0;
        norm.end_episode(static_cast<long>(i), ok ? std::optional<double>(std::stod(rows[i][2])) : std::nullopt);
        EXPECT_LE(norm.buffer().size(), c.arn.buffer_capacity);
        if (norm.bounds()) {
            ASSERT_FALSE(rows[i][8].empty());
            EXPECT_EQ(std::stod(rows[i][8]), norm.bounds()->eta_upper);
            EXPECT_EQ(std::stod(rows[i][9]), norm.bounds()->eta_lower);
        } else {
            EXPECT_TRUE(rows[i][8].empty());
        }
    }
    const auto ckpt = checkpoint::read_file(r.checkpoint_path);
    EXPECT_EQ(static_cast<std::size_t>(ckpt.tensor("norm/life/buffer").size()),
              std::min<std::size_t>(static_cast<std::size_t>(successes), c.arn.buffer_capacity));
}

TEST(Train, BaselineStillLogsLifetimes) {
    RunConfig c = small_config("baseline", 8);
    c.variant = reward::Variant::kBaseline;
    const auto rows = read_csv(fs::path(train(c).checkpoint_path).parent_path() / "episodes.csv");
    ASSERT_EQ(rows.size(), 8u);
    for (const auto& row : rows) {
        // 1/D - 1 lies in (-1, cap] for any damage D > 0.
        const double eta = std::stod(row[2]);
        EXPECT_GT(eta, -1.0);
        EXPECT_LE(eta, c.arn.rul_cap);
    }
}

TEST(Train, IdenticalRunsWriteIdenticalLogs) {
    const RunConfig a = small_config("det_a", 15);
    RunConfig b = a;
    b.output_dir = scratch("det_b").string();
    train(a);
    train(b);
    EXPECT_EQ(slurp(fs::path(a.output_dir) / "episodes.csv"), slurp(fs::path(b.output_dir) / "episodes.csv"));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
    for (auto variant : {reward::Variant::kOurs, reward::Variant::kTorque}) {
        RunConfig whole = small_config("resume_whole", 24);
        whole.variant = variant;
        RunConfig split = whole;
        split.output_dir = scratch("resume_split").string();
        train(whole);

        TrainOptions first;
        first.stop_after_episodes = 13;
        EXPECT_EQ(train(split, first).records.size(), 13u);
        // Rows written after the checkpoint are discarded on resume.
        std::ofstream(fs::path(split.output_dir) / "episodes.csv", std::ios::app) << "garbage\n";
        TrainOptions rest;
        rest.resume = true;
        EXPECT_EQ(train(split, rest).records.size(), 11u);

        EXPECT_EQ(slurp(fs::path(whole.output_dir) / "episodes.csv"),
                  slurp(fs::path(split.output_dir) / "episodes.csv"));
    }
}

TEST(Train, ResumeRejectsAnotherConfig) {
    RunConfig c = small_config("resume_mismatch", 3);
    train(c);
    c.seed += 1;
    TrainOptions opts;
    opts.resume = true;
    EXPECT_THROW(train(c, opts), VersionError);
}

// ---------------------------------------------------------------------------
// Evaluation and analysis

namespace {

LoadedRun trained(const std::string& name, reward::Variant v, int episodes) {
    RunConfig c = small_config(name, episodes);
    c.variant = v;
    return load_run(checkpoint::read_file(train(c).checkpoint_path));
}

}  // namespace

TEST(Evaluate, ZeroTrialsGiveEmptySummary) {
    LoadedRun run = trained("eval_zero", reward::Variant::kOurs, 2);
    const EvalSummary s = evaluate(run, 0);
    EXPECT_EQ(s.trials, 0);
    EXPECT_TRUE(s.detail.empty());
    std::ostringstream csv;
    write_eval_csv(csv, {s});
    EXPECT_NE(csv.str().find("ours,0,"), std::string::npos);
}

TEST(Evaluate, RepeatableAndFourRowTable) {
    std::vector<EvalSummary> rows;
    for (auto v : {reward::Variant::kOurs, reward::Variant::kBaseline, reward::Variant::kOursNoArn,
                   reward::Variant::kTorque}) {
        LoadedRun run = trained("eval_" + reward::variant_name(v), v, 6);
        const EvalSummary a = evaluate(run, 5);
        const EvalSummary b = evaluate(run, 5);
        EXPECT_EQ(a.rul_mean, b.rul_mean);
        EXPECT_EQ(a.rul_std, b.rul_std);
        EXPECT_EQ(a.success_rate, b.success_rate);
        EXPECT_EQ(a.distance_mean, b.distance_mean);
        ASSERT_EQ(a.detail.size(), 5u);
        rows.push_back(a);
    }
    std::ostringstream csv;
    write_eval_csv(csv, rows);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "label,trials,rul_mean,rul_std,success_rate,distance_mean,distance_std,multiplier");
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    ASSERT_EQ(lines.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        const double mult = std::stod(lines[i].substr(lines[i].rfind(',') + 1));
        EXPECT_DOUBLE_EQ(mult, rows[i].rul_mean / rows[1].rul_mean);
    }
    std::ostringstream svg;
    write_eval_svg(svg, rows);
    EXPECT_EQ(svg.str().rfind("<svg", 0), 0u);
    for (const char* label : {"ours", "baseline", "ours_no_arn", "torque"}) {
        EXPECT_NE(svg.str().find(std::string(">") + label + "<"), std::string::npos);
    }
}

TEST(Analyze, WeakestElementHasMostDamageAndIsStable) {
    LoadedRun run = trained("analyze", reward::Variant::kOurs, 3);
    const StressAnalysis a = analyze_stress(run, 77);
    const StressAnalysis b = analyze_stress(run, 77);
    ASSERT_EQ(a.element_rul.size(), run.tool->mesh().element_count());
    EXPECT_EQ(a.weakest_element, b.weakest_element);
    EXPECT_EQ(a.element_rul, b.element_rul);
    const auto max_damage = std::max_element(a.damage.begin(), a.damage.end());
    if (*max_damage > 0.0) {
        EXPECT_EQ(a.weakest_element, static_cast<std::size_t>(max_damage - a.damage.begin()));
    }
    std::ostringstream csv;
    write_heatmap_csv(csv, a);
    EXPECT_NE(csv.str().find("element,rul,log10_rul,damage,weakest"), std::string::npos);
    std::ostringstream svg;
    write_heatmap_svg(svg, run.tool->mesh(), a.element_rul);
    const std::string s = svg.str();
    std::size_t polygons = 0;
    for (std::size_t pos = s.find("<polygon"); pos != std::string::npos; pos = s.find("<polygon", pos + 1)) ++polygons;
    EXPECT_EQ(polygons, run.tool->mesh().element_count());
}

TEST(Analyze, ZeroContactHeatmapIsUniform) {
    const EpisodeResult r = run_episode(retreat, env::EnvConfig{}, 1, rake(), kCurve, kResiduals);
    const auto f = fatigue::analyze_history(r.history, kCurve, kResiduals);
    const double cap = reward::ArnConfig{}.rul_cap;
    for (double eta : f.rul.per_element) EXPECT_EQ(std::min(eta, cap), cap);
}

TEST(LoadRun, RejectsForeignCheckpoint) {
    checkpoint::Checkpoint empty;
    EXPECT_THROW(load_run(empty), VersionError);
    LoadedRun run = trained("load_shape", reward::Variant::kOurs, 1);
    checkpoint::Checkpoint ckpt = checkpoint::read_file((fs::path(run.config.output_dir) / "checkpoint.bin").string());
    ckpt.tensors["sac/actor"] = Eigen::MatrixXd::Zero(3, 1);
    EXPECT_THROW(load_run(ckpt), VersionError);
}
