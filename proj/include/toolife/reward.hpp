#pragma once

// Lifespan-guided reward: success-gated RUL reward with min-max
// normalization, temporal redistribution toward the episode end, and
// adaptive percentile bounds smoothed across episodes. Also the static
// and torque-based variants used for comparison.

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace toolife::reward {

struct ArnConfig {
    double beta = 5.0;     // percentile factor, bounds at beta and 100 - beta
    double alpha_s = 0.2;  // EMA weight of the fresh percentile estimate
    double gamma_b = 0.95;
    double rul_cap = 1e9;  // replaces +inf RUL (an undamaged tool)
    std::size_t buffer_capacity = 500;
    bool clamp_life_reward = false;  // clip the normalized life reward to [0, 1]

    void validate() const;
};

struct NormBounds {
    double eta_upper = 0.0;
    double eta_lower = 0.0;
    long episode_index = -1;

    bool degenerate() const { return !(eta_upper > eta_lower); }
    friend bool operator==(const NormBounds&, const NormBounds&) = default;
};

struct EpisodeOutcome {
    bool success = false;
    double tool_rul = 0.0;
    int length = 1;
};

/// FIFO window over recent values. +inf is stored as `cap`; NaN and -inf
/// are rejected.
class LifespanBuffer {
public:
    explicit LifespanBuffer(std::size_t capacity = 500, double cap = 1e9);

    void push(double value);
    std::size_t size() const { return values_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return values_.empty(); }
    std::vector<double> values() const { return {values_.begin(), values_.end()}; }

private:
    std::size_t capacity_;
    double cap_;
    std::deque<double> values_;
};

/// Inclusive linear-interpolation percentile (rank h = (n-1) p / 100).
double percentile(std::span<const double> values, double p);

struct HatBounds {
    double upper;
    double lower;
};

/// Percentiles 100 - beta and beta of the buffer; nullopt when empty.
std::optional<HatBounds> percentile_bounds(const LifespanBuffer& buffer, double beta);

struct SmoothedBounds {
    NormBounds bounds;
    bool swapped = false;  // EMA produced upper < lower and the pair was swapped
};

SmoothedBounds smooth_bounds(const NormBounds& previous, const HatBounds& hat, double alpha_s);

/// Success-gated min-max normalization. Throws DomainError on degenerate
/// bounds.
double rul_reward_static(double eta, const NormBounds& bounds, bool success, bool clamp = false);

/// task_reward + gamma_b^(T - t) * life_reward for 0 <= t <= T.
double redistribute(double task_reward, double life_reward, int t, int T, double gamma_b);

/// `t` counts completed steps at the end of the transition, so the final
/// transition of an episode has t = outcome.length and gets the full life
/// reward. Infinite RUL is capped at config.rul_cap.
double arn_reward(double task_reward, int t, const EpisodeOutcome& outcome, const NormBounds& bounds,
                  const ArnConfig& config);

/// 1 - 1/eta. Throws DomainError for eta <= 0 or NaN; returns 1 for +inf.
double static_life_reward(double eta);

/// 1 - (tau - tau_min) / (tau_max - tau_min) with the bounds' upper/lower
/// read as tau_max/tau_min. Throws DomainError on degenerate bounds.
double torque_reward(double tau, const NormBounds& tau_bounds);

/// Adaptive bounds over a stream of per-episode statistics. Until two
/// values are seen no bounds exist; the first two values seed them, and
/// every later episode moves them by one EMA step toward the current
/// buffer percentiles.
class AdaptiveNormalizer {
public:
    explicit AdaptiveNormalizer(const ArnConfig& config);

    /// Closes episode `episode_index`. `value` is the statistic of a
    /// successful episode, nullopt otherwise.
    void end_episode(long episode_index, std::optional<double> value);

    const std::optional<NormBounds>& bounds() const { return bounds_; }
    const LifespanBuffer& buffer() const { return buffer_; }
    const ArnConfig& config() const { return config_; }
    std::size_t swap_warnings() const { return swap_warnings_; }

    /// Restores a saved state (checkpoint resume).
    void restore(std::span<const double> buffer_values, std::optional<NormBounds> bounds,
                 std::size_t swap_warnings);

private:
    ArnConfig config_;
    LifespanBuffer buffer_;
    std::optional<NormBounds> bounds_;
    std::size_t swap_warnings_ = 0;
};

enum class Variant { kOurs, kBaseline, kOursNoArn, kTorque };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

/// Everything the per-variant life term needs about one finished episode.
struct EpisodeSummary {
    bool success = false;
    double tool_rul = 0.0;
    double max_torque = 0.0;
    int length = 1;
};

/// Life term that multiplies gamma_b^(T - t) for one episode, given the
/// bounds snapshot in force when the reward is computed. Zero whenever the
/// episode failed or the bounds are missing or degenerate.
double life_term(Variant variant, const EpisodeSummary& episode, const std::optional<NormBounds>& bounds,
                 const ArnConfig& config, double failed_tool_reward);

/// Reward of one transition under `variant`; `t` as in arn_reward.
double shaped_reward(Variant variant, double task_reward, int t, const EpisodeSummary& episode,
                     const std::optional<NormBounds>& bounds, const ArnConfig& config,
                     double failed_tool_reward);

}  // namespace toolife::reward
