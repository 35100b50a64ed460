#include "toolife/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "toolife/error.hpp"

namespace toolife::harness {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Tool model

fea::Mesh rake_tool_mesh() {
    const std::vector<fea::Rect> parts{
        {0.00, -0.015, 0.10, 0.015},  // shaft
        {0.10, -0.050, 0.12, 0.015},  // head
        {0.11, 0.015, 0.12, 0.080},   // arm
    };
    fea::Mesh mesh = fea::rect_union_mesh(parts, 0.005);
    fea::fix_nodes_left_of(mesh, 0.0);
    return mesh;
}

ToolModel::ToolModel(fea::Mesh mesh, const fea::Material& material)
    : solver_(std::move(mesh), material), shape_(solver_.mesh()), mount_(solver_.mesh().fixed_centroid()) {
    const auto& m = solver_.mesh();
    std::vector<int> fixed = m.fixed_nodes;
    std::sort(fixed.begin(), fixed.end());
    for (int n : fea::boundary_nodes(m)) {
        if (!std::binary_search(fixed.begin(), fixed.end(), n)) free_boundary_.push_back(n);
    }
    if (free_boundary_.empty()) throw MeshError("tool mesh has no free boundary node to load");
}

fea::LoadCase ToolModel::load_case(const env::Contact& contact) const {
    const int node = fea::nearest_boundary_node(mesh(), free_boundary_, contact.point);
    return fea::LoadCase{{fea::PointLoad{node, contact.force.x(), contact.force.y()}}};
}

fea::StressField ToolModel::stress(const std::optional<env::Contact>& contact) const {
    if (!contact) return fea::StressField(mesh().element_count(), 0.0);
    return solver_.stress_sample(load_case(*contact));
}

double ToolModel::torque(const env::Contact& contact) const {
    const fea::Vec2 r = contact.point - mount_;
    return std::abs(r.x() * contact.force.y() - r.y() * contact.force.x());
}

// ---------------------------------------------------------------------------
// Rollouts

reward::EpisodeSummary EpisodeResult::summary() const {
    return {success, rul.tool_rul, max_torque, std::max(length, 1)};
}

EpisodeResult run_episode(const Policy& policy, const env::EnvConfig& env_config, std::uint64_t reset_seed,
                          const ToolModel& tool, const fatigue::SnCurve& curve,
                          const fatigue::FatigueOptions& options, long episode_id, const StepHook& hook) {
    EpisodeResult result;
    const std::size_t n_elem = tool.mesh().element_count();
    const std::vector<double> unloaded(n_elem, 0.0);
    result.history = fatigue::StressHistory(n_elem);
    result.history.append(0.0, unloaded);

    env::EnvState state = env::reset(env_config, reset_seed);
    bool done = false;
    while (!done) {
        const env::Observation obs = env::observe(state);
        const agent::Act raw = policy(obs);
        const env::EnvAction a = env::clamp_action({raw[0], raw[1]}, env_config);
        const env::StepOutcome out = env::step(state, a, env_config, tool.shape());

        fea::StressField field;
        try {
            field = tool.stress(out.contact);
        } catch (const SolverError& e) {
            result.fault = e.what();
            result.success = false;
            break;
        }
        result.history.append(static_cast<double>(result.length + 1), field);

        StepRecord rec;
        rec.step = result.length;
        rec.action = {a.dx, a.dy};
        rec.tool_position = out.next_state.tool_position;
        rec.object_position = out.next_state.object_position;
        rec.task_reward = out.task_reward;
        rec.contact = out.contact;
        result.trajectory.push_back(rec);

        result.task_return += out.task_reward;
        if (out.contact) result.max_torque = std::max(result.max_torque, tool.torque(*out.contact));
        if (hook) {
            agent::Transition tr;
            tr.state = obs;
            tr.action = rec.action;
            tr.task_reward = out.task_reward;
            tr.next_state = env::observe(out.next_state);
            tr.t = result.length;
            tr.episode_id = episode_id;
            tr.done = out.success;
            hook(tr);
        }
        ++result.length;
        result.success = out.success;
        done = out.done;
        state = out.next_state;
    }

    result.history.append(static_cast<double>(result.length + 1), unloaded);
    result.rul = fatigue::episode_rul(result.history, curve, options);
    result.final_distance = (state.object_position - state.goal_position).norm();
    return result;
}

void write_trajectory_csv(std::ostream& out, const EpisodeResult& episode) {
    out << "step,tool_x,tool_y,obj_x,obj_y,reward,contact_fx,contact_fy\n";
    char buf[512];
    for (const StepRecord& r : episode.trajectory) {
        const double fx = r.contact ? r.contact->force.x() : 0.0;
        const double fy = r.contact ? r.contact->force.y() : 0.0;
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                      r.tool_position.x(), r.tool_position.y(), r.object_position.x(), r.object_position.y(),
                      r.task_reward, fx, fy);
        out << buf;
    }
}

// ---------------------------------------------------------------------------
// Episode log

std::string episode_csv_header() {
    return "episode,success,tool_rul,return,final_distance,max_torque,steps,weakest_element,eta_upper,eta_lower";
}

std::string episode_csv_row(const EpisodeRecord& r) {
    char buf[512];
    int n = std::snprintf(buf, sizeof buf, "%ld,%d,%.17g,%.17g,%.17g,%.17g,%d,%zu,", r.episode, r.success ? 1 : 0,
                          r.tool_rul, r.task_return, r.final_distance, r.max_torque, r.steps, r.weakest_element);
    if (r.bounds) {
        std::snprintf(buf + n, sizeof buf - static_cast<std::size_t>(n), "%.17g,%.17g", r.bounds->eta_upper,
                      r.bounds->eta_lower);
    } else {
        std::snprintf(buf + n, sizeof buf - static_cast<std::size_t>(n), ",");
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Training state and checkpoints

namespace {

// Everything that evolves during training. Saved whole so a resumed run
// continues bit-for-bit.
struct TrainState {
    RunConfig config;
    ToolModel tool;
    agent::Sac sac;
    std::mt19937_64 rng;  // warmup actions and minibatch draws
    agent::ReplayBuffer replay;
    reward::AdaptiveNormalizer life_norm;
    reward::AdaptiveNormalizer torque_norm;
    long episodes_done = 0;
    long total_steps = 0;

    TrainState(const RunConfig& c, fea::Mesh mesh)
        : config(c),
          tool(std::move(mesh), c.material),
          sac(c.sac, derive_seed(c.seed, 1)),
          rng(derive_seed(c.seed, 2)),
          replay(c.replay_capacity),
          life_norm(c.arn),
          torque_norm(c.arn) {}
};

std::uint64_t reset_seed_for(std::uint64_t base, long episode) {
    return derive_seed(derive_seed(base, 3), static_cast<std::uint64_t>(episode));
}

// Config identity for resume checks: the episode budget and output
// directory may change between invocations.
std::string resume_hash(const RunConfig& c) {
    RunConfig k = c;
    k.episodes = 0;
    k.output_dir.clear();
    k.checkpoint_every = 0;
    return config_hash(k);
}

std::string mesh_text(const fea::Mesh& mesh) {
    std::ostringstream s;
    fea::write_mesh(s, mesh);
    return s.str();
}

Eigen::MatrixXd bounds_tensor(const std::optional<reward::NormBounds>& b) {
    if (!b) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(1, 3);
    m << b->eta_upper, b->eta_lower, static_cast<double>(b->episode_index);
    return m;
}

std::optional<reward::NormBounds> bounds_from(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return std::nullopt;
    if (m.rows() != 1 || m.cols() != 3) throw VersionError("bounds tensor has the wrong shape");
    return reward::NormBounds{m(0, 0), m(0, 1), static_cast<long>(m(0, 2))};
}

void save_normalizer(checkpoint::Checkpoint& ckpt, const std::string& name, const reward::AdaptiveNormalizer& n) {
    const std::vector<double> v = n.buffer().values();
    ckpt.tensors["norm/" + name + "/buffer"] = Eigen::Map<const Eigen::MatrixXd>(v.data(), 1, static_cast<Eigen::Index>(v.size()));
    ckpt.tensors["norm/" + name + "/bounds"] = bounds_tensor(n.bounds());
    ckpt.meta["norm/" + name + "/swaps"] = std::to_string(n.swap_warnings());
}

void load_normalizer(const checkpoint::Checkpoint& ckpt, const std::string& name, reward::AdaptiveNormalizer& n) {
    const Eigen::MatrixXd& buf = ckpt.tensor("norm/" + name + "/buffer");
    const std::vector<double> v(buf.data(), buf.data() + buf.size());
    n.restore(v, bounds_from(ckpt.tensor("norm/" + name + "/bounds")),
              std::stoull(ckpt.value("norm/" + name + "/swaps")));
}

long parse_long(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw VersionError("checkpoint field " + what + " is malformed");
    }
}

checkpoint::Checkpoint snapshot(const TrainState& st, std::uintmax_t csv_bytes, std::uintmax_t timing_bytes) {
    checkpoint::Checkpoint ckpt;
    ckpt.meta["run/config"] = config_to_json(st.config).dump();
    ckpt.meta["run/resume_hash"] = resume_hash(st.config);
    ckpt.meta["run/mesh"] = mesh_text(st.tool.mesh());
    ckpt.meta["run/episodes_done"] = std::to_string(st.episodes_done);
    ckpt.meta["run/total_steps"] = std::to_string(st.total_steps);
    ckpt.meta["run/csv_bytes"] = std::to_string(csv_bytes);
    ckpt.meta["run/timing_bytes"] = std::to_string(timing_bytes);
    ckpt.meta["run/rng"] = agent::save_rng(st.rng);
    save_normalizer(ckpt, "life", st.life_norm);
    save_normalizer(ckpt, "torque", st.torque_norm);
    st.replay.save(ckpt);
    st.sac.save(ckpt);
    return ckpt;
}

fea::Mesh mesh_from_checkpoint(const checkpoint::Checkpoint& ckpt) {
    std::istringstream in(ckpt.value("run/mesh"));
    return fea::read_mesh(in);
}

RunConfig config_from_checkpoint(const checkpoint::Checkpoint& ckpt) {
    json doc;
    try {
        doc = json::parse(ckpt.value("run/config"));
    } catch (const json::parse_error& e) {
        throw VersionError(std::string("checkpoint config is not valid JSON: ") + e.what());
    }
    try {
        return config_from_json(doc);
    } catch (const ConfigError& e) {
        throw VersionError(std::string("checkpoint config is incompatible: ") + e.what());
    }
}

void write_manifest(const RunConfig& config, long episodes_done) {
    const json manifest{
        {"config_hash", config_hash(config)},
        {"seed", config.seed},
        {"variant", reward::variant_name(config.variant)},
        {"episodes_completed", episodes_done},
        {"files", {"episodes.csv", "timing.csv", "checkpoint.bin"}},
        {"config", config_to_json(config)},
    };
    const fs::path path = fs::path(config.output_dir) / "manifest.json";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << manifest.dump(2) << '\n';
}

std::uintmax_t flushed_size(std::ofstream& out, const fs::path& path) {
    out.flush();
    return fs::file_size(path);
}

}  // namespace

TrainResult train(const RunConfig& config, const TrainOptions& options) {
    config.validate();
    if (config.mesh_path.empty()) throw ConfigError("config does not name a tool mesh");
    if (!fs::exists(config.mesh_path)) throw ConfigError("mesh file " + config.mesh_path + " does not exist");
    fea::Mesh mesh = fea::read_mesh_file(config.mesh_path);

    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    const fs::path csv_path = dir / "episodes.csv";
    const fs::path timing_path = dir / "timing.csv";
    const fs::path ckpt_path = dir / "checkpoint.bin";

    TrainState st(config, std::move(mesh));
    if (options.resume) {
        const checkpoint::Checkpoint ckpt = checkpoint::read_file(ckpt_path.string());
        if (ckpt.value("run/resume_hash") != resume_hash(config)) {
            throw VersionError("checkpoint " + ckpt_path.string() + " was written for a different config");
        }
        st.episodes_done = parse_long(ckpt.value("run/episodes_done"), "episodes_done");
        st.total_steps = parse_long(ckpt.value("run/total_steps"), "total_steps");
        agent::load_rng(ckpt.value("run/rng"), st.rng);
        load_normalizer(ckpt, "life", st.life_norm);
        load_normalizer(ckpt, "torque", st.torque_norm);
        st.replay.load(ckpt);
        st.sac.load(ckpt);
        // Drop log rows written after the checkpoint.
        fs::resize_file(csv_path, static_cast<std::uintmax_t>(parse_long(ckpt.value("run/csv_bytes"), "csv_bytes")));
        fs::resize_file(timing_path,
                        static_cast<std::uintmax_t>(parse_long(ckpt.value("run/timing_bytes"), "timing_bytes")));
    } else {
        std::ofstream(csv_path, std::ios::trunc) << episode_csv_header() << '\n';
        std::ofstream(timing_path, std::ios::trunc) << "episode,wall_seconds\n";
    }

    std::ofstream csv(csv_path, std::ios::app);
    std::ofstream timing(timing_path, std::ios::app);
    if (!csv || !timing) throw ConfigError("cannot open run logs in " + dir.string());
    write_manifest(config, st.episodes_done);

    auto save = [&] {
        const auto ckpt = snapshot(st, flushed_size(csv, csv_path), flushed_size(timing, timing_path));
        checkpoint::write_file(ckpt_path.string(), ckpt);
    };

    const fatigue::FatigueOptions fopts{config.count_residual_half_cycles};
    const bool torque_variant = config.variant == reward::Variant::kTorque;
    const double a_max = config.sac.action_scale;
    std::uniform_real_distribution<double> warmup_action(-a_max, a_max);

    TrainResult result;
    result.checkpoint_path = ckpt_path.string();
    const long target = options.stop_after_episodes >= 0
                            ? std::min<long>(options.stop_after_episodes, config.episodes)
                            : config.episodes;

    while (st.episodes_done < target) {
        const long e = st.episodes_done;
        const auto t0 = std::chrono::steady_clock::now();

        // Rewards sampled during this episode use the bounds in force at its start.
        const std::optional<reward::NormBounds> bounds =
            torque_variant ? st.torque_norm.bounds() : st.life_norm.bounds();
        const agent::RewardFn reward_fn = [&](const agent::Transition& tr, const reward::EpisodeSummary& ep) {
            return reward::shaped_reward(config.variant, tr.task_reward, tr.t + 1, ep, bounds, config.arn,
                                         config.failed_tool_reward);
        };
        const Policy policy = [&](const env::Observation& obs) -> agent::Act {
            if (st.total_steps < config.sac.warmup_steps) return {warmup_action(st.rng), warmup_action(st.rng)};
            return st.sac.act(obs, false);
        };
        const StepHook hook = [&](const agent::Transition& tr) {
            st.replay.add(tr);
            ++st.total_steps;
            if (st.total_steps < config.sac.warmup_steps) return;
            for (int g = 0; g < config.sac.gradient_steps; ++g) {
                const auto batch = st.replay.sample_ready_batch(config.sac.batch_size, st.rng, reward_fn);
                if (!batch) break;
                const agent::UpdateStats s = st.sac.update(*batch);
                if (!std::isfinite(s.critic_loss) || !std::isfinite(s.actor_loss) || !std::isfinite(s.alpha)) {
                    throw NumericalFault("non-finite SAC update in episode " + std::to_string(e));
                }
            }
        };

        EpisodeResult ep;
        try {
            ep = run_episode(policy, config.env, reset_seed_for(config.seed, e), st.tool, config.sn_curve, fopts, e,
                             hook);
        } catch (const NumericalFault&) {
            // Keep the last consistent state on disk for inspection.
            write_manifest(config, st.episodes_done);
            throw;
        }
        if (!ep.fault.empty() && options.log) *options.log << "episode " << e << ": FEA fault: " << ep.fault << '\n';

        const reward::EpisodeSummary summary = ep.summary();
        st.replay.finalize_episode(e, summary);
        st.life_norm.end_episode(e, ep.success ? std::optional<double>(ep.rul.tool_rul) : std::nullopt);
        st.torque_norm.end_episode(e, ep.success ? std::optional<double>(ep.max_torque) : std::nullopt);
        ++st.episodes_done;

        EpisodeRecord rec;
        rec.episode = e;
        rec.success = ep.success;
        rec.tool_rul = std::min(ep.rul.tool_rul, config.arn.rul_cap);
        rec.task_return = ep.task_return;
        rec.final_distance = ep.final_distance;
        rec.max_torque = ep.max_torque;
        rec.steps = ep.length;
        rec.weakest_element = ep.rul.weakest_element;
        rec.bounds = st.life_norm.bounds();
        csv << episode_csv_row(rec) << '\n';
        csv.flush();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        timing << e << ',' << secs << '\n';
        result.records.push_back(rec);

        if (options.log && (st.episodes_done % 50 == 0 || st.episodes_done == config.episodes)) {
            *options.log << "episode " << st.episodes_done << "/" << config.episodes << " success=" << ep.success
                         << " rul=" << rec.tool_rul << '\n';
        }
        if (config.checkpoint_every > 0 && st.episodes_done % config.checkpoint_every == 0) save();
    }
    save();
    write_manifest(config, st.episodes_done);
    return result;
}

LoadedRun load_run(const checkpoint::Checkpoint& ckpt) {
    LoadedRun run;
    run.config = config_from_checkpoint(ckpt);
    run.tool = std::make_shared<const ToolModel>(mesh_from_checkpoint(ckpt), run.config.material);
    run.sac.emplace(run.config.sac, 0);
    run.sac->load(ckpt);
    run.episodes_done = parse_long(ckpt.value("run/episodes_done"), "episodes_done");
    return run;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Policy deterministic_policy(LoadedRun& run) {
    return [&run](const env::Observation& obs) { return run.sac->act(obs, true); };
}

std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

}  // namespace

EvalSummary evaluate(LoadedRun& run, int n_trials, std::optional<std::uint64_t> eval_seed) {
    if (n_trials < 0) throw ContractError("n_trials must be >= 0");
    if (!run.tool || !run.sac) throw ContractError("run is not loaded");
    const RunConfig& c = run.config;
    const std::uint64_t seed0 = eval_seed.value_or(c.eval_seed);
    const fatigue::FatigueOptions fopts{c.count_residual_half_cycles};

    EvalSummary s;
    s.label = reward::variant_name(c.variant);
    s.trials = n_trials;
    std::vector<double> ruls, dists;
    int successes = 0;
    for (int i = 0; i < n_trials; ++i) {
        const EpisodeResult ep = run_episode(deterministic_policy(run), c.env, seed0 + static_cast<std::uint64_t>(i),
                                             *run.tool, c.sn_curve, fopts, i);
        TrialRecord t{i, ep.success, std::min(ep.rul.tool_rul, c.arn.rul_cap), ep.final_distance, ep.max_torque};
        s.detail.push_back(t);
        ruls.push_back(t.tool_rul);
        dists.push_back(t.final_distance);
        successes += ep.success ? 1 : 0;
    }
    mean_std(ruls, s.rul_mean, s.rul_std);
    mean_std(dists, s.distance_mean, s.distance_std);
    s.success_rate = n_trials > 0 ? static_cast<double>(successes) / n_trials : 0.0;
    return s;
}

namespace {

const EvalSummary* reference_row(const std::vector<EvalSummary>& rows) {
    if (rows.empty()) return nullptr;
    for (const auto& r : rows) {
        if (r.label == "baseline") return &r;
    }
    return &rows.front();
}

double multiplier(const EvalSummary& row, const EvalSummary* ref) {
    if (!ref || !(ref->rul_mean > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return row.rul_mean / ref->rul_mean;
}

}  // namespace

void write_eval_csv(std::ostream& out, const std::vector<EvalSummary>& rows) {
    out << "label,trials,rul_mean,rul_std,success_rate,distance_mean,distance_std,multiplier\n";
    const EvalSummary* ref = reference_row(rows);
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.label.c_str(), r.trials,
                      r.rul_mean, r.rul_std, r.success_rate, r.distance_mean, r.distance_std, multiplier(r, ref));
        out << buf;
    }
}

void write_eval_svg(std::ostream& out, const std::vector<EvalSummary>& rows) {
    const double width = 160.0 + 120.0 * static_cast<double>(std::max<std::size_t>(rows.size(), 1));
    const double height = 360.0, top = 40.0, bottom = 300.0, left = 80.0;
    double ymax = 0.0;
    for (const auto& r : rows) ymax = std::max(ymax, r.rul_mean + r.rul_std);
    if (!(ymax > 0.0)) ymax = 1.0;
    const auto y_of = [&](double v) { return bottom - (bottom - top) * std::clamp(v, 0.0, ymax) / ymax; };
    const EvalSummary* ref = reference_row(rows);

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">Tool RUL (mean ± std)</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << width - 20 << "\" y2=\"" << bottom
        << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = ymax * k / 4.0;
        out << "<text x=\"" << left - 6 << "\" y=\"" << y_of(v) + 4 << "\" text-anchor=\"end\">" << fmt(v, 3)
            << "</text>\n";
    }
    static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double x = left + 30.0 + 120.0 * static_cast<double>(i);
        const double y = y_of(r.rul_mean);
        out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"70\" height=\"" << bottom - y << "\" fill=\""
            << colors[i % 5] << "\"/>\n";
        const double cx = x + 35.0;
        out << "<line x1=\"" << cx << "\" y1=\"" << y_of(r.rul_mean - r.rul_std) << "\" x2=\"" << cx << "\" y2=\""
            << y_of(r.rul_mean + r.rul_std) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << cx << "\" y=\"" << bottom + 16 << "\" text-anchor=\"middle\">" << r.label
            << "</text>\n";
        const double m = multiplier(r, ref);
        out << "<text x=\"" << cx << "\" y=\"" << y_of(r.rul_mean + r.rul_std) - 6
            << "\" text-anchor=\"middle\">" << (std::isfinite(m) ? fmt(m, 3) + "×" : "n/a") << "</text>\n";
        out << "<text x=\"" << cx << "\" y=\"" << bottom + 32 << "\" text-anchor=\"middle\">success "
            << fmt(100.0 * r.success_rate, 3) << "%</text>\n";
    }
    out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Stress analysis

StressAnalysis analyze_stress(LoadedRun& run, std::optional<std::uint64_t> seed) {
    if (!run.tool || !run.sac) throw ContractError("run is not loaded");
    const RunConfig& c = run.config;
    const fatigue::FatigueOptions fopts{c.count_residual_half_cycles};
    StressAnalysis a;
    a.episode = run_episode(deterministic_policy(run), c.env, seed.value_or(c.eval_seed), *run.tool, c.sn_curve,
                            fopts);
    const fatigue::EpisodeFatigue f = fatigue::analyze_history(a.episode.history, c.sn_curve, fopts);
    a.damage = f.damage;
    a.element_rul.reserve(f.rul.per_element.size());
    for (double eta : f.rul.per_element) a.element_rul.push_back(std::min(eta, c.arn.rul_cap));
    a.weakest_element = f.rul.weakest_element;
    return a;
}

void write_heatmap_csv(std::ostream& out, const StressAnalysis& analysis) {
    out << "element,rul,log10_rul,damage,weakest\n";
    char buf[256];
    for (std::size_t e = 0; e < analysis.element_rul.size(); ++e) {
        const double eta = analysis.element_rul[e];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d\n", e, eta, std::log10(eta), analysis.damage[e],
                      e == analysis.weakest_element ? 1 : 0);
        out << buf;
    }
}

namespace {

// Blue (long life) to red (short life).
std::string heat_color(double u) {
    u = std::clamp(u, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(255.0 * u));
    const int g = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(2.0 * u - 1.0)) * 0.8));
    const int b = static_cast<int>(std::lround(255.0 * (1.0 - u)));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace

void write_heatmap_svg(std::ostream& out, const fea::Mesh& mesh, const std::vector<double>& element_rul) {
    if (element_rul.size() != mesh.element_count()) throw ContractError("one RUL value per element is required");
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& p : mesh.nodes) {
        x0 = std::min(x0, p.x());
        y0 = std::min(y0, p.y());
        x1 = std::max(x1, p.x());
        y1 = std::max(y1, p.y());
    }
    double lo = 1e300, hi = -1e300;
    for (double eta : element_rul) {
        const double l = std::log10(std::max(eta, 1e-300));
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    const double span = std::max({x1 - x0, y1 - y0, 1e-12});
    const double scale = 560.0 / span, pad = 20.0;
    const double w = (x1 - x0) * scale + 2 * pad, h = (y1 - y0) * scale + 2 * pad + 30.0;
    const auto px = [&](const fea::Vec2& p) {
        return std::pair{pad + (p.x() - x0) * scale, pad + (y1 - p.y()) * scale};
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << std::setprecision(6);
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const double l = std::log10(std::max(element_rul[e], 1e-300));
        const double u = hi > lo ? (hi - l) / (hi - lo) : 0.0;
        out << "<polygon points=\"";
        for (int k = 0; k < 3; ++k) {
            const auto [x, y] = px(mesh.nodes[static_cast<std::size_t>(mesh.elements[e][static_cast<std::size_t>(k)])]);
            out << x << ',' << y << (k < 2 ? " " : "");
        }
        out << "\" fill=\"" << heat_color(u) << "\" stroke=\"#555\" stroke-width=\"0.3\"/>\n";
    }
    out << "<text x=\"" << pad << "\" y=\"" << h - 10 << "\">log10 RUL: " << fmt(lo, 4) << " (red) to " << fmt(hi, 4)
        << " (blue)</text>\n";
    out << "</svg>\n";
}

}  // namespace toolife::harness
