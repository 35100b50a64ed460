#include "toolife/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "toolife/error.hpp"

namespace toolife::reward {

void ArnConfig::validate() const {
    if (!(beta > 0.0 && beta < 50.0)) throw ConfigError("beta must lie in (0, 50)");
    if (!(alpha_s > 0.0 && alpha_s < 1.0)) throw ConfigError("alpha_s must lie in (0, 1)");
    if (!(gamma_b >= 0.0 && gamma_b <= 1.0)) throw ConfigError("gamma_b must lie in [0, 1]");
    if (!(std::isfinite(rul_cap) && rul_cap > 0.0)) throw ConfigError("rul_cap must be finite and positive");
    if (buffer_capacity < 1) throw ConfigError("buffer capacity must be at least 1");
}

LifespanBuffer::LifespanBuffer(std::size_t capacity, double cap) : capacity_(capacity), cap_(cap) {
    if (capacity_ < 1) throw ConfigError("buffer capacity must be at least 1");
    if (!std::isfinite(cap_)) throw ConfigError("buffer cap must be finite");
}

void LifespanBuffer::push(double value) {
    if (std::isnan(value) || value == -std::numeric_limits<double>::infinity()) {
        throw DataError("buffer value must be a number below +inf");
    }
    if (values_.size() == capacity_) {
        values_.pop_front();
    }
    values_.push_back(std::min(value, cap_));
}

double percentile(std::span<const double> values, double p) {
    if (values.empty()) throw ContractError("percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw DomainError("percentile rank must lie in [0, 100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::optional<HatBounds> percentile_bounds(const LifespanBuffer& buffer, double beta) {
    if (buffer.empty()) return std::nullopt;
    const std::vector<double> v = buffer.values();
    return HatBounds{percentile(v, 100.0 - beta), percentile(v, beta)};
}

SmoothedBounds smooth_bounds(const NormBounds& previous, const HatBounds& hat, double alpha_s) {
    SmoothedBounds out;
    out.bounds.eta_upper = alpha_s * hat.upper + (1.0 - alpha_s) * previous.eta_upper;
    out.bounds.eta_lower = alpha_s * hat.lower + (1.0 - alpha_s) * previous.eta_lower;
    out.bounds.episode_index = previous.episode_index + 1;
    if (out.bounds.eta_upper < out.bounds.eta_lower) {
        std::swap(out.bounds.eta_upper, out.bounds.eta_lower);
        out.swapped = true;
    }
    return out;
}

double rul_reward_static(double eta, const NormBounds& bounds, bool success, bool clamp) {
    if (bounds.degenerate()) {
        throw DomainError("normalization bounds are degenerate");
    }
    if (!success) return 0.0;
    const double r = (eta - bounds.eta_lower) / (bounds.eta_upper - bounds.eta_lower);
    return clamp ? std::clamp(r, 0.0, 1.0) : r;
}

double redistribute(double task_reward, double life_reward, int t, int T, double gamma_b) {
    if (t < 0 || t > T) throw ContractError("redistribution step outside [0, T]");
    if (life_reward == 0.0) return task_reward;
    return task_reward + std::pow(gamma_b, T - t) * life_reward;
}

double arn_reward(double task_reward, int t, const EpisodeOutcome& outcome, const NormBounds& bounds,
                  const ArnConfig& config) {
    if (outcome.length < 1) throw ContractError("episode length must be at least 1");
    const double eta = std::min(outcome.tool_rul, config.rul_cap);
    const double life = rul_reward_static(eta, bounds, outcome.success, config.clamp_life_reward);
    return redistribute(task_reward, life, t, outcome.length, config.gamma_b);
}

double static_life_reward(double eta) {
    if (!(eta > 0.0)) throw DomainError("static life reward needs eta > 0");
    return 1.0 - 1.0 / eta;
}

double torque_reward(double tau, const NormBounds& tau_bounds) {
    if (tau_bounds.degenerate()) throw DomainError("torque bounds are degenerate");
    return 1.0 - (tau - tau_bounds.eta_lower) / (tau_bounds.eta_upper - tau_bounds.eta_lower);
}

AdaptiveNormalizer::AdaptiveNormalizer(const ArnConfig& config)
    : config_(config), buffer_(config.buffer_capacity, config.rul_cap) {
    config_.validate();
}

void AdaptiveNormalizer::end_episode(long episode_index, std::optional<double> value) {
    if (value) {
        buffer_.push(*value);
    }
    if (!bounds_) {
        if (buffer_.size() < 2) return;
        const std::vector<double> v = buffer_.values();
        bounds_ = NormBounds{std::max(v[0], v[1]), std::min(v[0], v[1]), episode_index};
        return;
    }
    const SmoothedBounds s = smooth_bounds(*bounds_, *percentile_bounds(buffer_, config_.beta), config_.alpha_s);
    bounds_ = s.bounds;
    bounds_->episode_index = episode_index;
    swap_warnings_ += s.swapped ? 1 : 0;
}

void AdaptiveNormalizer::restore(std::span<const double> buffer_values, std::optional<NormBounds> bounds,
                                 std::size_t swap_warnings) {
    buffer_ = LifespanBuffer(config_.buffer_capacity, config_.rul_cap);
    for (double v : buffer_values) buffer_.push(v);
    bounds_ = bounds;
    swap_warnings_ = swap_warnings;
}

Variant parse_variant(const std::string& name) {
    if (name == "ours") return Variant::kOurs;
    if (name == "baseline") return Variant::kBaseline;
    if (name == "ours_no_arn") return Variant::kOursNoArn;
    if (name == "torque") return Variant::kTorque;
    throw ConfigError("unknown variant '" + name + "' (expected ours, baseline, ours_no_arn or torque)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::kOurs: return "ours";
        case Variant::kBaseline: return "baseline";
        case Variant::kOursNoArn: return "ours_no_arn";
        case Variant::kTorque: return "torque";
    }
    return "unknown";
}

double life_term(Variant variant, const EpisodeSummary& episode, const std::optional<NormBounds>& bounds,
                 const ArnConfig& config, double failed_tool_reward) {
    if (!episode.success) return 0.0;
    switch (variant) {
        case Variant::kBaseline:
            return 0.0;
        case Variant::kOursNoArn:
            return episode.tool_rul > 0.0 ? static_life_reward(episode.tool_rul) : failed_tool_reward;
        case Variant::kOurs:
            if (!bounds || bounds->degenerate()) return 0.0;
            return rul_reward_static(std::min(episode.tool_rul, config.rul_cap), *bounds, true,
                                     config.clamp_life_reward);
        case Variant::kTorque: {
            if (!bounds || bounds->degenerate()) return 0.0;
            const double r = torque_reward(episode.max_torque, *bounds);
            return config.clamp_life_reward ? std::clamp(r, 0.0, 1.0) : r;
        }
    }
    return 0.0;
}

double shaped_reward(Variant variant, double task_reward, int t, const EpisodeSummary& episode,
                     const std::optional<NormBounds>& bounds, const ArnConfig& config,
                     double failed_tool_reward) {
    const double life = life_term(variant, episode, bounds, config, failed_tool_reward);
    return redistribute(task_reward, life, t, episode.length, config.gamma_b);
}

}  // namespace toolife::reward
