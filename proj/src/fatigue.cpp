#include "toolife/fatigue.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "toolife/error.hpp"

namespace toolife::fatigue {

StressHistory::StressHistory(std::size_t element_count) : samples_(element_count) {
    if (element_count == 0) {
        throw DataError("stress history needs at least one element");
    }
}

void StressHistory::append(double time, std::span<const double> field) {
    if (field.size() != samples_.size()) {
        throw DataError("stress field has " + std::to_string(field.size()) +
                        " values, history tracks " + std::to_string(samples_.size()) +
                        " elements");
    }
    if (!std::isfinite(time)) {
        throw DataError("non-finite sample time");
    }
    for (double s : field) {
        if (!std::isfinite(s) || s < 0.0) {
            throw DataError("von Mises stress must be finite and non-negative");
        }
    }
    times_.push_back(time);
    for (std::size_t e = 0; e < samples_.size(); ++e) {
        samples_[e].push_back(field[e]);
    }
}

void StressHistory::validate() const {
    if (samples_.empty()) {
        throw DataError("stress history has no elements");
    }
    for (const auto& seq : samples_) {
        if (seq.size() != times_.size()) {
            throw DataError("element sequence length differs from the time axis");
        }
        for (double s : seq) {
            if (!std::isfinite(s) || s < 0.0) {
                throw DataError("von Mises stress must be finite and non-negative");
            }
        }
    }
}

void SnCurve::validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("S-N curve needs a > 0 and b > 0");
    }
}

std::vector<double> turning_points(std::span<const double> sequence) {
    std::vector<double> flat;
    flat.reserve(sequence.size());
    for (double v : sequence) {
        if (!std::isfinite(v)) {
            throw DataError("rainflow input contains a non-finite value");
        }
        if (flat.empty() || v != flat.back()) {
            flat.push_back(v);
        }
    }
    if (flat.size() <= 2) {
        return flat;
    }

    std::vector<double> tp;
    tp.reserve(flat.size());
    tp.push_back(flat.front());
    for (std::size_t i = 1; i + 1 < flat.size(); ++i) {
        if ((flat[i] - flat[i - 1]) * (flat[i + 1] - flat[i]) < 0.0) {
            tp.push_back(flat[i]);
        }
    }
    tp.push_back(flat.back());
    return tp;
}

CycleList rainflow_count(std::span<const double> sequence) {
    if (sequence.empty()) {
        throw ContractError("rainflow_count needs at least one sample");
    }
    const std::vector<double> tp = turning_points(sequence);

    CycleList cycles;
    std::vector<double> stack;
    stack.reserve(tp.size());
    for (double p : tp) {
        stack.push_back(p);
        while (stack.size() >= 4) {
            const std::size_t n = stack.size();
            const double a = stack[n - 4];
            const double b = stack[n - 3];
            const double c = stack[n - 2];
            const double d = stack[n - 1];
            const double inner = std::abs(b - c);
            if (inner <= std::abs(a - b) && inner <= std::abs(c - d)) {
                cycles.push_back({inner / 2.0, 1.0});
                stack.erase(stack.end() - 3, stack.end() - 1);
            } else {
                break;
            }
        }
    }
    for (std::size_t i = 0; i + 1 < stack.size(); ++i) {
        cycles.push_back({std::abs(stack[i + 1] - stack[i]) / 2.0, 0.5});
    }
    return cycles;
}

double cycles_to_failure(double amplitude, const SnCurve& curve) {
    if (!(amplitude > 0.0)) {
        throw DomainError("cycles_to_failure needs a positive amplitude");
    }
    curve.validate();
    return curve.a * std::pow(amplitude, -curve.b);
}

double element_damage(std::span<const Cycle> cycles, const SnCurve& curve) {
    double d = 0.0;
    for (const Cycle& c : cycles) {
        d += c.count / cycles_to_failure(c.amplitude, curve);
    }
    return d;
}

std::vector<double> miner_damage(const RainflowSeries& series, const SnCurve& curve) {
    std::vector<double> damage;
    damage.reserve(series.size());
    for (const CycleList& cycles : series) {
        damage.push_back(element_damage(cycles, curve));
    }
    return damage;
}

RulEstimate rul_from_damage(std::span<const double> damage) {
    RulEstimate out;
    out.per_element.reserve(damage.size());
    for (std::size_t i = 0; i < damage.size(); ++i) {
        const double d = damage[i];
        if (std::isnan(d)) {
            throw DataError("damage value is NaN");
        }
        if (d < 0.0) {
            throw ContractError("negative damage at element " + std::to_string(i));
        }
        const double eta = d > 0.0 ? 1.0 / d - 1.0 : kInfiniteLife;
        out.per_element.push_back(eta);
        if (eta < out.tool_rul) {
            out.tool_rul = eta;
            out.weakest_element = i;
        }
    }
    return out;
}

EpisodeFatigue analyze_history(const StressHistory& history, const SnCurve& curve,
                               const FatigueOptions& options) {
    history.validate();
    curve.validate();

    EpisodeFatigue out;
    out.series.reserve(history.element_count());
    for (std::size_t e = 0; e < history.element_count(); ++e) {
        std::span<const double> seq = history.element(e);
        CycleList cycles = seq.empty() ? CycleList{} : rainflow_count(seq);
        if (!options.count_residual_half_cycles) {
            std::erase_if(cycles, [](const Cycle& c) { return c.count < 1.0; });
        }
        out.series.push_back(std::move(cycles));
    }
    out.damage = miner_damage(out.series, curve);
    out.rul = rul_from_damage(out.damage);
    return out;
}

RulEstimate episode_rul(const StressHistory& history, const SnCurve& curve,
                        const FatigueOptions& options) {
    return analyze_history(history, curve, options).rul;
}

}  // namespace toolife::fatigue
