#pragma once

// Soft Actor-Critic: squashed-Gaussian actor, twin critics with Polyak
// targets, optional temperature tuning, and a replay buffer whose rewards
// are computed at sampling time from a per-episode table.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "toolife/checkpoint.hpp"
#include "toolife/nn.hpp"
#include "toolife/reward.hpp"

namespace toolife::agent {

inline constexpr int kObsDim = 4;
inline constexpr int kActDim = 2;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

using Obs = std::array<double, kObsDim>;
using Act = std::array<double, kActDim>;

struct SacParams {
    std::vector<int> hidden{64, 64};
    double gamma = 0.99;
    double tau = 0.005;  // Polyak coefficient: target <- target + tau * (online - target)
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    int batch_size = 32;
    bool auto_alpha = true;
    double initial_alpha = 0.1;
    double target_entropy = -2.0;
    double action_scale = 0.05;  // a_max, env units per unit of squashed action
    int gradient_steps = 1;      // per environment step
    int warmup_steps = 500;      // uniform random actions before the policy is used

    void validate() const;
};

struct Transition {
    Obs state{};
    Act action{};  // env units, within [-a_max, a_max]
    double task_reward = 0.0;
    Obs next_state{};
    int t = 0;  // 0-based step index of the action within its episode
    long episode_id = 0;
    bool done = false;  // terminal: no bootstrap from next_state
};

/// Column-per-sample minibatch. Actions are in env units.
struct Batch {
    Eigen::MatrixXd obs;
    Eigen::MatrixXd actions;
    Eigen::MatrixXd next_obs;
    Eigen::VectorXd rewards;
    Eigen::VectorXd done;
    std::vector<std::size_t> indices;

    int size() const { return static_cast<int>(rewards.size()); }
};

using RewardFn = std::function<double(const Transition&, const reward::EpisodeSummary&)>;

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    /// Throws DataError on non-finite fields and ContractError if the
    /// episode has already been finalized.
    void add(const Transition& tr);

    /// Records the episode outcome; its transitions become sampleable.
    void finalize_episode(long episode_id, const reward::EpisodeSummary& summary);

    bool is_finalized(long episode_id) const { return episodes_.count(episode_id) > 0; }
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t ready_count() const { return ready_; }

    /// Storage slot i (not insertion order).
    const Transition& at(std::size_t i) const { return data_.at(i); }
    const reward::EpisodeSummary& episode(long episode_id) const;

    /// Uniform draw, with replacement, over transitions of finalized
    /// episodes; nullopt if fewer than `batch_size` are available.
    std::optional<Batch> sample_ready_batch(int batch_size, std::mt19937_64& rng, const RewardFn& reward) const;

    void save(checkpoint::Checkpoint& ckpt) const;
    void load(const checkpoint::Checkpoint& ckpt);

private:
    void evict(std::size_t slot);

    std::size_t capacity_;
    std::vector<Transition> data_;
    std::size_t head_ = 0;  // next slot to overwrite once full
    std::map<long, reward::EpisodeSummary> episodes_;
    std::map<long, std::size_t> live_;  // stored transitions per episode
    std::size_t ready_ = 0;
};

/// Density of a = tanh(u), u ~ N(mean, exp(log_std)^2), at a in (-1, 1).
double squashed_log_density(double a, double mean, double log_std);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double entropy = 0.0;  // -mean log pi of the actor batch
};

class Sac {
public:
    Sac(const SacParams& params, std::uint64_t seed);

    /// Action in env units. Throws NumericalFault if the actor output is
    /// not finite.
    Act act(const Obs& obs, bool deterministic);

    UpdateStats update(const Batch& batch);

    double critic_update(const Batch& batch);
    double actor_update(const Batch& batch, Eigen::RowVectorXd* log_prob = nullptr);
    void alpha_update(const Eigen::RowVectorXd& log_prob);
    void soft_update();

    /// Loss with explicit reparameterization noise (kActDim x B); gradients
    /// are written when the pointers are non-null.
    double critic_loss(const Batch& batch, const Eigen::MatrixXd& next_noise, Eigen::VectorXd* grad_q1,
                       Eigen::VectorXd* grad_q2) const;
    double actor_loss(const Batch& batch, const Eigen::MatrixXd& noise, Eigen::VectorXd* grad,
                      Eigen::RowVectorXd* log_prob = nullptr) const;

    /// Samples a batch of policy actions (unit scale) with their log-densities.
    Eigen::RowVectorXd sample_log_prob(const Eigen::MatrixXd& obs, Eigen::MatrixXd* actions = nullptr);

    Eigen::MatrixXd noise(int cols);

    nn::Mlp& actor() { return actor_; }
    nn::Mlp& q1() { return q1_; }
    nn::Mlp& q2() { return q2_; }
    nn::Mlp& q1_target() { return q1_target_; }
    nn::Mlp& q2_target() { return q2_target_; }
    const nn::Mlp& actor() const { return actor_; }
    const nn::Mlp& q1() const { return q1_; }
    const nn::Mlp& q2() const { return q2_; }
    const nn::Mlp& q1_target() const { return q1_target_; }
    const nn::Mlp& q2_target() const { return q2_target_; }

    double alpha() const;
    void set_alpha(double alpha);
    const SacParams& params() const { return params_; }

    void save(checkpoint::Checkpoint& ckpt) const;
    void load(const checkpoint::Checkpoint& ckpt);

private:
    struct PolicyEval;
    PolicyEval evaluate_policy(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& noise) const;
    Eigen::MatrixXd critic_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& unit_actions) const;

    SacParams params_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_;
    nn::Mlp actor_, q1_, q2_, q1_target_, q2_target_;
    nn::Adam actor_opt_, q1_opt_, q2_opt_, alpha_opt_;
    Eigen::VectorXd log_alpha_;  // size 1, kept as a vector for the optimizer
};

/// Text form of an engine's full state, for checkpoints.
std::string save_rng(const std::mt19937_64& rng);
void load_rng(const std::string& text, std::mt19937_64& rng);

}  // namespace toolife::agent
