#include "toolife/agent.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "toolife/error.hpp"

namespace toolife::agent {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
constexpr double kLogStdHalfSpan = 0.5 * (kLogStdMax - kLogStdMin);

// log(1 - tanh(u)^2) without cancellation for large |u|.
double log1m_tanh2(double u) {
    const double x = -2.0 * u;
    const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    return 2.0 * (std::numbers::ln2 - u - softplus);
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

void SacParams::validate() const {
    if (hidden.empty()) throw ConfigError("sac.hidden needs at least one layer");
    for (int h : hidden) {
        if (h < 1) throw ConfigError("sac.hidden widths must be positive");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("sac.gamma must lie in [0, 1]");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("sac.tau must lie in (0, 1]");
    if (!(actor_lr >= 0.0 && critic_lr >= 0.0 && alpha_lr >= 0.0)) throw ConfigError("learning rates must be >= 0");
    if (batch_size < 1) throw ConfigError("sac.batch_size must be positive");
    if (!(initial_alpha >= 0.0)) throw ConfigError("sac.initial_alpha must be >= 0");
    if (auto_alpha && !(initial_alpha > 0.0)) throw ConfigError("temperature tuning needs initial_alpha > 0");
    if (!std::isfinite(target_entropy)) throw ConfigError("sac.target_entropy must be finite");
    if (!(action_scale > 0.0)) throw ConfigError("sac.action_scale must be positive");
    if (gradient_steps < 0) throw ConfigError("sac.gradient_steps must be >= 0");
    if (warmup_steps < 0) throw ConfigError("sac.warmup_steps must be >= 0");
}

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw ConfigError("replay capacity must be positive");
    data_.reserve(capacity_);
}

void ReplayBuffer::add(const Transition& tr) {
    for (double v : tr.state) {
        if (!std::isfinite(v)) throw DataError("transition state is not finite");
    }
    for (double v : tr.next_state) {
        if (!std::isfinite(v)) throw DataError("transition next state is not finite");
    }
    if (!std::isfinite(tr.action[0]) || !std::isfinite(tr.action[1]) || !std::isfinite(tr.task_reward)) {
        throw DataError("transition action or reward is not finite");
    }
    if (tr.t < 0) throw ContractError("transition step index is negative");
    if (is_finalized(tr.episode_id)) throw ContractError("episode is already finalized");

    if (data_.size() < capacity_) {
        data_.push_back(tr);
    } else {
        evict(head_);
        data_[head_] = tr;
        head_ = (head_ + 1) % capacity_;
    }
    ++live_[tr.episode_id];
}

void ReplayBuffer::evict(std::size_t slot) {
    const long id = data_[slot].episode_id;
    auto it = live_.find(id);
    if (is_finalized(id)) --ready_;
    if (--it->second == 0) {
        live_.erase(it);
        episodes_.erase(id);
    }
}

void ReplayBuffer::finalize_episode(long episode_id, const reward::EpisodeSummary& summary) {
    if (is_finalized(episode_id)) throw ContractError("episode is already finalized");
    if (summary.length < 1) throw ContractError("episode length must be at least 1");
    auto it = live_.find(episode_id);
    if (it == live_.end()) return;  // nothing stored (or all evicted)
    episodes_.emplace(episode_id, summary);
    ready_ += it->second;
}

const reward::EpisodeSummary& ReplayBuffer::episode(long episode_id) const {
    auto it = episodes_.find(episode_id);
    if (it == episodes_.end()) throw ContractError("episode " + std::to_string(episode_id) + " is not finalized");
    return it->second;
}

std::optional<Batch> ReplayBuffer::sample_ready_batch(int batch_size, std::mt19937_64& rng,
                                                      const RewardFn& reward) const {
    if (batch_size < 1) throw ContractError("batch size must be positive");
    if (ready_ < static_cast<std::size_t>(batch_size)) return std::nullopt;

    Batch b;
    b.obs.resize(kObsDim, batch_size);
    b.next_obs.resize(kObsDim, batch_size);
    b.actions.resize(kActDim, batch_size);
    b.rewards.resize(batch_size);
    b.done.resize(batch_size);
    b.indices.reserve(static_cast<std::size_t>(batch_size));
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    for (int k = 0; k < batch_size; ++k) {
        std::size_t i = pick(rng);
        while (!is_finalized(data_[i].episode_id)) i = pick(rng);
        const Transition& tr = data_[i];
        for (int d = 0; d < kObsDim; ++d) {
            b.obs(d, k) = tr.state[static_cast<std::size_t>(d)];
            b.next_obs(d, k) = tr.next_state[static_cast<std::size_t>(d)];
        }
        b.actions(0, k) = tr.action[0];
        b.actions(1, k) = tr.action[1];
        b.rewards[k] = reward(tr, episodes_.at(tr.episode_id));
        b.done[k] = tr.done ? 1.0 : 0.0;
        b.indices.push_back(i);
    }
    return b;
}

void ReplayBuffer::save(checkpoint::Checkpoint& ckpt) const {
    const auto n = static_cast<Eigen::Index>(data_.size());
    Eigen::MatrixXd state(kObsDim, n), next(kObsDim, n), action(kActDim, n), scalars(4, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Transition& tr = data_[static_cast<std::size_t>(i)];
        for (int d = 0; d < kObsDim; ++d) {
            state(d, i) = tr.state[static_cast<std::size_t>(d)];
            next(d, i) = tr.next_state[static_cast<std::size_t>(d)];
        }
        action(0, i) = tr.action[0];
        action(1, i) = tr.action[1];
        scalars(0, i) = tr.task_reward;
        scalars(1, i) = tr.t;
        scalars(2, i) = static_cast<double>(tr.episode_id);
        scalars(3, i) = tr.done ? 1.0 : 0.0;
    }
    Eigen::MatrixXd episodes(5, static_cast<Eigen::Index>(episodes_.size()));
    Eigen::Index j = 0;
    for (const auto& [id, s] : episodes_) {
        episodes.col(j++) << static_cast<double>(id), s.success ? 1.0 : 0.0, s.tool_rul, s.max_torque, s.length;
    }
    ckpt.tensors["replay/state"] = state;
    ckpt.tensors["replay/next_state"] = next;
    ckpt.tensors["replay/action"] = action;
    ckpt.tensors["replay/scalars"] = scalars;
    ckpt.tensors["replay/episodes"] = episodes;
    ckpt.meta["replay/capacity"] = std::to_string(capacity_);
    ckpt.meta["replay/head"] = std::to_string(head_);
}

void ReplayBuffer::load(const checkpoint::Checkpoint& ckpt) {
    if (std::stoull(ckpt.value("replay/capacity")) != capacity_) {
        throw VersionError("replay capacity differs from the checkpoint");
    }
    const Eigen::MatrixXd& state = ckpt.tensor("replay/state");
    const Eigen::MatrixXd& next = ckpt.tensor("replay/next_state");
    const Eigen::MatrixXd& action = ckpt.tensor("replay/action");
    const Eigen::MatrixXd& scalars = ckpt.tensor("replay/scalars");
    const Eigen::MatrixXd& episodes = ckpt.tensor("replay/episodes");
    const Eigen::Index n = state.cols();
    if (state.rows() != kObsDim || next.rows() != kObsDim || action.rows() != kActDim || scalars.rows() != 4 ||
        next.cols() != n || action.cols() != n || scalars.cols() != n || episodes.rows() != 5 ||
        static_cast<std::size_t>(n) > capacity_) {
        throw VersionError("replay tensors have inconsistent shapes");
    }
    data_.clear();
    live_.clear();
    episodes_.clear();
    ready_ = 0;
    head_ = std::stoull(ckpt.value("replay/head"));
    for (Eigen::Index i = 0; i < n; ++i) {
        Transition tr;
        for (int d = 0; d < kObsDim; ++d) {
            tr.state[static_cast<std::size_t>(d)] = state(d, i);
            tr.next_state[static_cast<std::size_t>(d)] = next(d, i);
        }
        tr.action = {action(0, i), action(1, i)};
        tr.task_reward = scalars(0, i);
        tr.t = static_cast<int>(scalars(1, i));
        tr.episode_id = static_cast<long>(scalars(2, i));
        tr.done = scalars(3, i) != 0.0;
        data_.push_back(tr);
        ++live_[tr.episode_id];
    }
    for (Eigen::Index j = 0; j < episodes.cols(); ++j) {
        const long id = static_cast<long>(episodes(0, j));
        episodes_[id] = {episodes(1, j) != 0.0, episodes(2, j), episodes(3, j), static_cast<int>(episodes(4, j))};
        ready_ += live_.at(id);
    }
}

// ---------------------------------------------------------------- policy

double squashed_log_density(double a, double mean, double log_std) {
    if (!(a > -1.0 && a < 1.0)) return -std::numeric_limits<double>::infinity();
    const double u = std::atanh(a);
    const double z = (u - mean) / std::exp(log_std);
    return -0.5 * z * z - log_std - kHalfLog2Pi - log1m_tanh2(u);
}

struct Sac::PolicyEval {
    nn::Mlp::Cache cache;
    Eigen::MatrixXd raw_log_std;
    Eigen::MatrixXd std_dev;
    Eigen::MatrixXd noise;
    Eigen::MatrixXd action;  // tanh(u), unit scale
    Eigen::RowVectorXd log_prob;
};

Sac::PolicyEval Sac::evaluate_policy(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise) const {
    PolicyEval pe;
    const Eigen::MatrixXd out = actor_.forward(obs, &pe.cache);
    const Eigen::Index n = obs.cols();
    const Eigen::MatrixXd mean = out.topRows(kActDim);
    pe.raw_log_std = out.bottomRows(kActDim);
    const Eigen::MatrixXd log_std =
        (kLogStdMin + kLogStdHalfSpan * (pe.raw_log_std.array().tanh() + 1.0)).matrix();
    pe.std_dev = log_std.array().exp().matrix();
    pe.noise = noise;
    const Eigen::MatrixXd u = mean + pe.std_dev.cwiseProduct(noise);
    pe.action = u.array().tanh().matrix();
    pe.log_prob.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double lp = 0.0;
        for (int j = 0; j < kActDim; ++j) {
            lp += -0.5 * noise(j, k) * noise(j, k) - log_std(j, k) - kHalfLog2Pi - log1m_tanh2(u(j, k));
        }
        pe.log_prob[k] = lp;
    }
    return pe;
}

Eigen::MatrixXd Sac::critic_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& unit_actions) const {
    Eigen::MatrixXd x(kObsDim + kActDim, obs.cols());
    x.topRows(kObsDim) = obs;
    x.bottomRows(kActDim) = unit_actions;
    return x;
}

// ---------------------------------------------------------------- SAC

Sac::Sac(const SacParams& params, std::uint64_t seed) : params_(params), rng_(seed) {
    params_.validate();
    std::vector<int> actor_sizes{kObsDim};
    std::vector<int> critic_sizes{kObsDim + kActDim};
    for (int h : params_.hidden) {
        actor_sizes.push_back(h);
        critic_sizes.push_back(h);
    }
    actor_sizes.push_back(2 * kActDim);
    critic_sizes.push_back(1);
    actor_ = nn::Mlp(actor_sizes);
    q1_ = nn::Mlp(critic_sizes);
    q2_ = nn::Mlp(critic_sizes);
    actor_.init(rng_);
    q1_.init(rng_);
    q2_.init(rng_);
    q1_target_ = q1_;
    q2_target_ = q2_;
    actor_opt_ = nn::Adam(static_cast<std::size_t>(actor_.params().size()), params_.actor_lr);
    q1_opt_ = nn::Adam(static_cast<std::size_t>(q1_.params().size()), params_.critic_lr);
    q2_opt_ = nn::Adam(static_cast<std::size_t>(q2_.params().size()), params_.critic_lr);
    alpha_opt_ = nn::Adam(1, params_.alpha_lr);
    log_alpha_ = Eigen::VectorXd::Constant(1, params_.initial_alpha > 0.0 ? std::log(params_.initial_alpha)
                                                                           : -std::numeric_limits<double>::infinity());
}

double Sac::alpha() const { return std::exp(log_alpha_[0]); }

void Sac::set_alpha(double alpha) {
    log_alpha_[0] = alpha > 0.0 ? std::log(alpha) : -std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd Sac::noise(int cols) {
    Eigen::MatrixXd e(kActDim, cols);
    for (Eigen::Index k = 0; k < cols; ++k) {
        for (int j = 0; j < kActDim; ++j) e(j, k) = normal_(rng_);
    }
    return e;
}

Act Sac::act(const Obs& obs, bool deterministic) {
    Eigen::MatrixXd x(kObsDim, 1);
    for (int d = 0; d < kObsDim; ++d) x(d, 0) = obs[static_cast<std::size_t>(d)];
    if (!x.allFinite()) throw DataError("observation is not finite");
    const Eigen::MatrixXd n = deterministic ? Eigen::MatrixXd::Zero(kActDim, 1) : noise(1);
    const PolicyEval pe = evaluate_policy(x, n);
    if (!pe.action.allFinite()) {
        throw NumericalFault("actor produced a non-finite action (parameters finite: " +
                             std::string(all_finite(actor_.params()) ? "yes" : "no") + ")");
    }
    return {params_.action_scale * pe.action(0, 0), params_.action_scale * pe.action(1, 0)};
}

double Sac::critic_loss(const Batch& batch, const Eigen::MatrixXd& next_noise, Eigen::VectorXd* grad_q1,
                        Eigen::VectorXd* grad_q2) const {
    const Eigen::Index n = batch.size();
    const double alpha = this->alpha();

    const PolicyEval next = evaluate_policy(batch.next_obs, next_noise);
    const Eigen::MatrixXd next_in = critic_input(batch.next_obs, next.action);
    const Eigen::MatrixXd qt = q1_target_.forward(next_in).cwiseMin(q2_target_.forward(next_in));
    Eigen::RowVectorXd y(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double soft_value = qt(0, k) - (alpha > 0.0 ? alpha * next.log_prob[k] : 0.0);
        y[k] = batch.rewards[k] + params_.gamma * (1.0 - batch.done[k]) * soft_value;
    }

    const Eigen::MatrixXd in = critic_input(batch.obs, batch.actions / params_.action_scale);
    nn::Mlp::Cache c1, c2;
    const Eigen::RowVectorXd e1 = q1_.forward(in, &c1).row(0) - y;
    const Eigen::RowVectorXd e2 = q2_.forward(in, &c2).row(0) - y;
    const double loss = 0.5 * (e1.squaredNorm() + e2.squaredNorm()) / static_cast<double>(n);
    if (grad_q1) {
        grad_q1->setZero(q1_.params().size());
        q1_.backward(c1, e1 / static_cast<double>(n), *grad_q1);
    }
    if (grad_q2) {
        grad_q2->setZero(q2_.params().size());
        q2_.backward(c2, e2 / static_cast<double>(n), *grad_q2);
    }
    return loss;
}

double Sac::actor_loss(const Batch& batch, const Eigen::MatrixXd& noise, Eigen::VectorXd* grad,
                       Eigen::RowVectorXd* log_prob) const {
    const Eigen::Index n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double alpha = this->alpha();

    const PolicyEval pe = evaluate_policy(batch.obs, noise);
    const Eigen::MatrixXd in = critic_input(batch.obs, pe.action);
    nn::Mlp::Cache c1, c2;
    const Eigen::RowVectorXd v1 = q1_.forward(in, &c1).row(0);
    const Eigen::RowVectorXd v2 = q2_.forward(in, &c2).row(0);

    double loss = 0.0;
    Eigen::RowVectorXd pick1(n), pick2(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const bool first = v1[k] <= v2[k];
        pick1[k] = first ? 1.0 : 0.0;
        pick2[k] = first ? 0.0 : 1.0;
        loss += (alpha > 0.0 ? alpha * pe.log_prob[k] : 0.0) - (first ? v1[k] : v2[k]);
    }
    loss *= inv_n;
    if (log_prob) *log_prob = pe.log_prob;
    if (!grad) return loss;

    // dL/da through min(Q1, Q2); critic parameter gradients are discarded.
    Eigen::VectorXd scratch1 = Eigen::VectorXd::Zero(q1_.params().size());
    Eigen::VectorXd scratch2 = Eigen::VectorXd::Zero(q2_.params().size());
    const Eigen::MatrixXd dx = q1_.backward(c1, -inv_n * pick1, scratch1) + q2_.backward(c2, -inv_n * pick2, scratch2);
    const Eigen::MatrixXd d_action = dx.bottomRows(kActDim);

    const double w = alpha > 0.0 ? alpha * inv_n : 0.0;
    const Eigen::ArrayXXd a = pe.action.array();
    // d/du of -log(1 - tanh(u)^2) is 2 tanh(u).
    const Eigen::ArrayXXd d_u = d_action.array() * (1.0 - a.square()) + w * 2.0 * a;
    const Eigen::ArrayXXd d_log_std = d_u * pe.std_dev.array() * pe.noise.array() - w;
    const Eigen::ArrayXXd d_raw = d_log_std * kLogStdHalfSpan * (1.0 - pe.raw_log_std.array().tanh().square());

    Eigen::MatrixXd d_out(2 * kActDim, n);
    d_out.topRows(kActDim) = d_u.matrix();
    d_out.bottomRows(kActDim) = d_raw.matrix();
    grad->setZero(actor_.params().size());
    actor_.backward(pe.cache, d_out, *grad);
    return loss;
}

Eigen::RowVectorXd Sac::sample_log_prob(const Eigen::MatrixXd& obs, Eigen::MatrixXd* actions) {
    const PolicyEval pe = evaluate_policy(obs, noise(static_cast<int>(obs.cols())));
    if (actions) *actions = pe.action;
    return pe.log_prob;
}

double Sac::critic_update(const Batch& batch) {
    Eigen::VectorXd g1, g2;
    const double loss = critic_loss(batch, noise(batch.size()), &g1, &g2);
    if (!std::isfinite(loss) || !g1.allFinite() || !g2.allFinite()) {
        throw NumericalFault("critic loss or gradient is not finite (loss " + std::to_string(loss) + ")");
    }
    q1_opt_.step(q1_.params(), g1);
    q2_opt_.step(q2_.params(), g2);
    return loss;
}

double Sac::actor_update(const Batch& batch, Eigen::RowVectorXd* log_prob) {
    Eigen::VectorXd g;
    const double loss = actor_loss(batch, noise(batch.size()), &g, log_prob);
    if (!std::isfinite(loss) || !g.allFinite()) {
        throw NumericalFault("actor loss or gradient is not finite (loss " + std::to_string(loss) + ")");
    }
    actor_opt_.step(actor_.params(), g);
    return loss;
}

void Sac::alpha_update(const Eigen::RowVectorXd& log_prob) {
    // Loss -log_alpha * mean(log pi + target_entropy).
    Eigen::VectorXd g(1);
    g[0] = -(log_prob.array() + params_.target_entropy).mean();
    alpha_opt_.step(log_alpha_, g);
}

void Sac::soft_update() {
    const double tau = params_.tau;
    // Written as an increment so that a target equal to its online network
    // stays bit-identical.
    q1_target_.params() += tau * (q1_.params() - q1_target_.params());
    q2_target_.params() += tau * (q2_.params() - q2_target_.params());
}

UpdateStats Sac::update(const Batch& batch) {
    UpdateStats s;
    s.critic_loss = critic_update(batch);
    Eigen::RowVectorXd log_prob;
    s.actor_loss = actor_update(batch, &log_prob);
    if (params_.auto_alpha) alpha_update(log_prob);
    soft_update();
    s.alpha = alpha();
    s.entropy = -log_prob.mean();
    return s;
}

// ---------------------------------------------------------------- persistence

std::string save_rng(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void load_rng(const std::string& text, std::mt19937_64& rng) {
    std::istringstream is(text);
    is >> rng;
    if (!is) throw VersionError("cannot parse RNG state");
}

void Sac::save(checkpoint::Checkpoint& ckpt) const {
    auto put_net = [&](const std::string& name, const nn::Mlp& net) { ckpt.tensors["sac/" + name] = net.params(); };
    put_net("actor", actor_);
    put_net("q1", q1_);
    put_net("q2", q2_);
    put_net("q1_target", q1_target_);
    put_net("q2_target", q2_target_);
    ckpt.tensors["sac/log_alpha"] = log_alpha_;
    auto put_opt = [&](const std::string& name, const nn::Adam& opt) {
        ckpt.tensors["sac/opt/" + name + "/m"] = opt.first_moment();
        ckpt.tensors["sac/opt/" + name + "/v"] = opt.second_moment();
        ckpt.meta["sac/opt/" + name + "/t"] = std::to_string(opt.steps());
    };
    put_opt("actor", actor_opt_);
    put_opt("q1", q1_opt_);
    put_opt("q2", q2_opt_);
    put_opt("alpha", alpha_opt_);
    std::ostringstream sizes;
    for (int s : actor_.sizes()) sizes << s << ' ';
    ckpt.meta["sac/actor_sizes"] = sizes.str();
    std::ostringstream rng;
    rng << rng_ << ' ' << normal_;
    ckpt.meta["sac/rng"] = rng.str();
}

void Sac::load(const checkpoint::Checkpoint& ckpt) {
    auto get_net = [&](const std::string& name, nn::Mlp& net) {
        const Eigen::MatrixXd& m = ckpt.tensor("sac/" + name);
        if (m.size() != net.params().size() || m.cols() != 1) {
            throw VersionError("network '" + name + "' in the checkpoint has a different size");
        }
        net.params() = m.col(0);
    };
    get_net("actor", actor_);
    get_net("q1", q1_);
    get_net("q2", q2_);
    get_net("q1_target", q1_target_);
    get_net("q2_target", q2_target_);
    const Eigen::MatrixXd& la = ckpt.tensor("sac/log_alpha");
    if (la.size() != 1) throw VersionError("log_alpha must be a scalar");
    log_alpha_[0] = la(0, 0);
    auto get_opt = [&](const std::string& name, nn::Adam& opt) {
        opt.restore(ckpt.tensor("sac/opt/" + name + "/m").col(0), ckpt.tensor("sac/opt/" + name + "/v").col(0),
                    std::stol(ckpt.value("sac/opt/" + name + "/t")));
    };
    get_opt("actor", actor_opt_);
    get_opt("q1", q1_opt_);
    get_opt("q2", q2_opt_);
    get_opt("alpha", alpha_opt_);
    std::istringstream rng(ckpt.value("sac/rng"));
    rng >> rng_ >> normal_;
    if (!rng) throw VersionError("cannot parse the agent RNG state");
}

}  // namespace toolife::agent
