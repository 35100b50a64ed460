#pragma once

// Stress-history fatigue analysis: rainflow counting (four-point method),
// Basquin S-N curve, Palmgren-Miner linear damage and remaining useful life.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace toolife::fatigue {

/// Per-element von Mises stress histories sharing one time axis.
/// samples[e][k] is the stress (Pa) of element e at sample_times[k].
class StressHistory {
public:
    StressHistory() = default;
    explicit StressHistory(std::size_t element_count);

    std::size_t element_count() const { return samples_.size(); }
    std::size_t sample_count() const { return times_.size(); }

    const std::vector<double>& sample_times() const { return times_; }
    std::span<const double> element(std::size_t e) const { return samples_.at(e); }

    /// Appends one time sample of a full stress field. The field must hold
    /// exactly one finite, non-negative value per element.
    void append(double time, std::span<const double> field);

    /// Throws DataError if the sequence lengths disagree or a value is
    /// negative or non-finite.
    void validate() const;

    friend bool operator==(const StressHistory&, const StressHistory&) = default;

private:
    std::vector<double> times_;
    std::vector<std::vector<double>> samples_;
};

struct Cycle {
    double amplitude;  // half the stress range, Pa
    double count;      // 1.0 for a closed cycle, 0.5 for a residual half-cycle

    friend bool operator==(const Cycle&, const Cycle&) = default;
};

using CycleList = std::vector<Cycle>;
using RainflowSeries = std::vector<CycleList>;

/// Basquin law N = a * S^(-b).
struct SnCurve {
    double a;
    double b;

    void validate() const;
};

/// Reversal points of a sequence: plateaus collapsed to a single value,
/// interior points kept only where the slope strictly changes sign.
/// The first and last points are always kept.
std::vector<double> turning_points(std::span<const double> sequence);

/// Four-point rainflow decomposition. Closed cycles are emitted in
/// extraction order, followed by the residue as half-cycles.
CycleList rainflow_count(std::span<const double> sequence);

double cycles_to_failure(double amplitude, const SnCurve& curve);

double element_damage(std::span<const Cycle> cycles, const SnCurve& curve);

std::vector<double> miner_damage(const RainflowSeries& series, const SnCurve& curve);

inline constexpr double kInfiniteLife = std::numeric_limits<double>::infinity();

struct RulEstimate {
    std::vector<double> per_element;  // +inf where the element took no damage
    double tool_rul = kInfiniteLife;  // minimum over elements
    std::size_t weakest_element = 0;  // lowest index attaining the minimum
};

RulEstimate rul_from_damage(std::span<const double> damage);

struct FatigueOptions {
    /// When false, residual half-cycles are dropped before the Miner sum.
    bool count_residual_half_cycles = true;
};

struct EpisodeFatigue {
    RainflowSeries series;
    std::vector<double> damage;
    RulEstimate rul;
};

/// Full pipeline for one episode: rainflow, Miner sum and RUL per element.
EpisodeFatigue analyze_history(const StressHistory& history, const SnCurve& curve,
                               const FatigueOptions& options = {});

RulEstimate episode_rul(const StressHistory& history, const SnCurve& curve,
                        const FatigueOptions& options = {});

}  // namespace toolife::fatigue
