#pragma once

#include "simulators.hpp"

namespace delayest {

/// Two-input two-output rational system whose four channels step through
/// distinct delay schedules, driven by a pair of binary sequences. Ships
/// with the estimator tuning the system was designed to exercise.
struct MimoDemo {
    MimoDelayedSystem system;
    EstimatorConfig config;
    Index bootstrap_rows;
    Index length;

    /// One PRBS per input channel, phase-split from the given seed.
    std::vector<Vector> make_inputs(Index n, std::uint64_t seed) const {
        ExcitationSpec spec;
        spec.kind = ExcitationSpec::Kind::prbs;
        spec.length = n;
        spec.amplitude = 1.0;
        spec.register_length = 11;
        const Index m = system.num_inputs();
        std::vector<std::vector<double>> streams;
        for (Index c = 0; c < m; ++c) {
            spec.seed = mix_seed(seed, 1 + static_cast<std::uint64_t>(c));
            streams.push_back(prbs(spec));
        }
        std::vector<Vector> out(static_cast<std::size_t>(n));
        for (Index k = 0; k < n; ++k) {
            Vector u(m);
            for (Index c = 0; c < m; ++c) u(c) = streams[c][static_cast<std::size_t>(k)];
            out[static_cast<std::size_t>(k)] = u;
        }
        return out;
    }
};

inline MimoDemo example1_preset() {
    std::vector<RationalChannel> channels(4);
    channels[0] = {{0.02, 0.1}, {1.0, -1.1, 0.3}, StepSchedule({500}, {6, 2})};
    channels[1] = {{1.0, 2.0}, {1.0, -0.4}, StepSchedule({500, 1000}, {1, 5, 2})};
    channels[2] = {{1.0, 0.5}, {1.0, 0.9}, StepSchedule({1500}, {1, 4})};
    channels[3] = {{0.02}, {1.0, -0.8, -0.25, 0.2}, StepSchedule({500, 1500}, {5, 2, 1})};

    MimoDelayedSystem system(2, 2, std::move(channels), Vector::Constant(2, 0.01));

    EstimatorConfig config;
    config.num_inputs = 2;
    config.num_outputs = 2;
    config.data_cols = 100;
    config.past_horizon = 8;
    config.future_horizon = 8;
    config.forgetting = 0.9;
    config.criterion_epsilon = 1e-5;
    config.max_delay = 6;

    return {std::move(system), config, 115, 2000};
}

/// Scalar switched-ARX process cycling through three modes with delays
/// 1, 3 and 4, driven by unit white noise.
struct SarxDemo {
    SarxModel model;
    EstimatorConfig config;
    Index bootstrap_rows;
    Index length;
    double noise_std;

    std::vector<double> make_inputs(Index n, std::uint64_t seed) const {
        ExcitationSpec spec;
        spec.kind = ExcitationSpec::Kind::gaussian;
        spec.length = n;
        spec.amplitude = 1.0;
        spec.seed = mix_seed(seed, 1);
        return gaussian_sequence(spec);
    }
};

inline SarxDemo example2_preset() {
    std::vector<SarxMode> modes(3);
    modes[0] = {{0.89, 0.0, -0.0710}, {-1.2878, -1.1252}, 1};
    modes[1] = {{-0.75}, {1.1050, 3.16}, 3};
    modes[2] = {{-0.5, 0.1875}, {0.4055}, 4};

    SarxModel model(std::move(modes),
                    StepSchedule({250, 500, 750, 1000, 1250, 1500, 1750},
                                 {2, 1, 2, 0, 1, 2, 0, 1}));

    EstimatorConfig config;
    config.num_inputs = 1;
    config.num_outputs = 1;
    config.data_cols = 78;
    config.past_horizon = 11;
    config.future_horizon = 12;
    config.forgetting = 0.8;
    config.criterion_epsilon = 1e-5;
    config.max_delay = 4;

    return {std::move(model), config, 100, 2000, 0.05};
}

}  // namespace delayest
