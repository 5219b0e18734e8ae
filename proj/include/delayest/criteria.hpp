#pragma once

#include <cmath>

#include "estimator.hpp"

namespace delayest {

struct CriterionResult {
    Index delay;
    double score;  ///< winning criterion value; larger means more decisive
};

/// Reads the delay off an estimated impulse-response vector as the first
/// significant rise: for each candidate lag t the entry there is compared
/// against the largest entry at earlier lags (plus epsilon), and the winning
/// lag minus one is the delay (a delay-T channel first responds at lag
/// T + 1). The scan starts at lag 1: the lag-0 entry has no predecessors, so
/// its ratio degenerates to feedthrough/epsilon, which on noisy estimates is
/// arbitrarily large and carries no delay information. Ties resolve to the
/// smallest lag, and the result is clamped to [0, max_delay].
inline CriterionResult ratio_criterion(const Vector& channel, double epsilon,
                                       Index max_delay) {
    if (!(epsilon > 0.0))
        throw std::invalid_argument("ratio_criterion: epsilon must be positive");
    if (max_delay < 0)
        throw std::invalid_argument("ratio_criterion: max_delay must be non-negative");
    if (channel.size() < max_delay + 2)
        throw std::invalid_argument("ratio_criterion: channel vector must have at least "
                                    "max_delay + 2 entries");
    double best = -1.0, running_max = std::abs(channel(0));
    Index best_t = 1;
    for (Index t = 1; t <= max_delay + 1; ++t) {
        const double c = std::abs(channel(t)) / (running_max + epsilon);
        if (c > best) {
            best = c;
            best_t = t;
        }
        running_max = std::max(running_max, std::abs(channel(t)));
    }
    const Index d = std::clamp<Index>(best_t - 1, 0, max_delay);
    return {d, best};
}

/// Baseline criterion: the delay is the count of leading entries below the
/// threshold, minus one (the lag-0 feedthrough entry is sub-threshold even
/// for a zero-delay channel), floored at zero.
inline Index threshold_criterion(const Vector& channel, double threshold) {
    if (!(threshold > 0.0))
        throw std::invalid_argument("threshold_criterion: threshold must be positive");
    Index z = 0;
    while (z < channel.size() && std::abs(channel(z)) < threshold) ++z;
    return std::max<Index>(z - 1, 0);
}

enum class DelayCriterion { ratio, threshold };

/// Per-channel delay decisions. `valid` is false where the channel vector is
/// numerically indistinguishable from zero, in which case the delay value
/// carries no information.
struct DelayMatrix {
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> delays;  // outputs x inputs
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;
};

inline DelayMatrix estimate_delays(const MarkovEstimate& markov, const EstimatorConfig& cfg,
                                   DelayCriterion criterion, double threshold = 0.02) {
    const Index l = markov.num_outputs(), m = markov.num_inputs();
    DelayMatrix out;
    out.delays.resize(l, m);
    out.valid.resize(l, m);
    const double floor = 1e-12 * std::max(1.0, markov.first_block_column().norm());
    for (Index output = 0; output < l; ++output) {
        for (Index input = 0; input < m; ++input) {
            const Vector v = markov.channel_vector(output, input);
            out.valid(output, input) = v.norm() > floor;
            switch (criterion) {
                case DelayCriterion::ratio:
                    out.delays(output, input) =
                        ratio_criterion(v, cfg.criterion_epsilon, cfg.max_delay).delay;
                    break;
                case DelayCriterion::threshold:
                    out.delays(output, input) =
                        std::min(threshold_criterion(v, threshold), cfg.max_delay);
                    break;
            }
        }
    }
    return out;
}

inline DelayMatrix estimate_delays(const EstimatorState& state, DelayCriterion criterion,
                                   double threshold = 0.02) {
    return estimate_delays(markov_estimate(state), state.config, criterion, threshold);
}

}  // namespace delayest
