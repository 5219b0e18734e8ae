#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "estimator.hpp"

namespace delayest {

/// Deterministic 64-bit mixer used to derive independent stream seeds from
/// one user seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Piecewise-constant integer schedule over sample indices: value(0) applies
/// until the first breakpoint, and each breakpoint switches to the next
/// value from that index on.
class StepSchedule {
public:
    StepSchedule() : values_{0} {}

    static StepSchedule constant(Index value) {
        StepSchedule s;
        s.values_ = {value};
        return s;
    }

    StepSchedule(std::vector<long> breakpoints, std::vector<Index> values)
        : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
        if (values_.size() != breakpoints_.size() + 1)
            throw std::invalid_argument("StepSchedule: need one more value than breakpoints");
        if (!std::is_sorted(breakpoints_.begin(), breakpoints_.end()))
            throw std::invalid_argument("StepSchedule: breakpoints must be sorted");
    }

    Index at(long k) const {
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), k);
        return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
    }

    Index max_value() const { return *std::max_element(values_.begin(), values_.end()); }

    const std::vector<long>& breakpoints() const { return breakpoints_; }
    const std::vector<Index>& values() const { return values_; }

private:
    std::vector<long> breakpoints_;
    std::vector<Index> values_;
};

namespace detail {

/// Roots of the monic polynomial z^n + c[0] z^(n-1) + ... + c[n-1] via the
/// companion matrix; returns the largest root magnitude (0 for n == 0).
inline double max_root_magnitude(std::span<const double> c) {
    const Index n = static_cast<Index>(c.size());
    if (n == 0) return 0.0;
    Matrix companion = Matrix::Zero(n, n);
    for (Index k = 0; k < n; ++k) companion(0, k) = -c[k];
    for (Index k = 1; k < n; ++k) companion(k, k - 1) = 1.0;
    return companion.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// One strictly proper rational transfer channel with a time-varying input
/// delay. `numerator[s]` multiplies the input delayed by s + 1 further
/// samples, so the response to an input applied at time k first shows at
/// k + 1 + delay; `denominator` starts with its leading 1.
struct RationalChannel {
    std::vector<double> numerator;
    std::vector<double> denominator{1.0};
    StepSchedule delay;

    void validate() const {
        if (numerator.empty())
            throw std::invalid_argument("RationalChannel: empty numerator");
        if (denominator.empty() || denominator[0] != 1.0)
            throw std::invalid_argument("RationalChannel: denominator must start with 1");
        const std::span<const double> tail(denominator.data() + 1, denominator.size() - 1);
        if (detail::max_root_magnitude(tail) >= 1.0)
            throw std::invalid_argument("RationalChannel: unstable denominator (root on or "
                                        "outside the unit circle)");
        for (Index v : delay.values())
            if (v < 0) throw std::invalid_argument("RationalChannel: negative delay");
    }
};

/// Bank of rational channels, one per (output, input) pair, with independent
/// additive Gaussian noise per output.
class MimoDelayedSystem {
public:
    MimoDelayedSystem(Index num_outputs, Index num_inputs,
                      std::vector<RationalChannel> channels, Vector noise_std)
        : num_outputs_(num_outputs),
          num_inputs_(num_inputs),
          channels_(std::move(channels)),
          noise_std_(std::move(noise_std)) {
        if (num_outputs_ < 1 || num_inputs_ < 1)
            throw std::invalid_argument("MimoDelayedSystem: need at least one input and output");
        if (static_cast<Index>(channels_.size()) != num_outputs_ * num_inputs_)
            throw std::invalid_argument("MimoDelayedSystem: need one channel per "
                                        "(output, input) pair, output-major");
        if (noise_std_.size() != num_outputs_ || (noise_std_.array() < 0.0).any())
            throw std::invalid_argument("MimoDelayedSystem: need one non-negative noise "
                                        "level per output");
        for (const RationalChannel& c : channels_) c.validate();
    }

    Index num_outputs() const { return num_outputs_; }
    Index num_inputs() const { return num_inputs_; }
    const Vector& noise_std() const { return noise_std_; }

    const RationalChannel& channel(Index output, Index input) const {
        if (output < 0 || output >= num_outputs_ || input < 0 || input >= num_inputs_)
            throw std::out_of_range("MimoDelayedSystem: channel index out of range");
        return channels_[static_cast<std::size_t>(output * num_inputs_ + input)];
    }

    Index true_delay(Index output, Index input, long k) const {
        return channel(output, input).delay.at(k);
    }

    Index max_delay() const {
        Index d = 0;
        for (const RationalChannel& c : channels_) d = std::max(d, c.delay.max_value());
        return d;
    }

    /// Same channel bank with different output noise levels.
    MimoDelayedSystem with_noise(Vector noise_std) const {
        return {num_outputs_, num_inputs_, channels_, std::move(noise_std)};
    }

private:
    Index num_outputs_, num_inputs_;
    std::vector<RationalChannel> channels_;
    Vector noise_std_;
};

/// Simulates the channel bank from zero initial conditions. Each channel
/// first applies its delay schedule sample-wise (indices before the start of
/// the record read as zero) and then filters through its rational dynamics;
/// outputs sum the channel responses plus seeded Gaussian noise.
inline std::vector<Sample> simulate_mimo(const MimoDelayedSystem& sys,
                                         const std::vector<Vector>& inputs,
                                         std::uint64_t seed) {
    const long n = static_cast<long>(inputs.size());
    const Index m = sys.num_inputs(), l = sys.num_outputs();
    for (const Vector& u : inputs)
        if (u.size() != m)
            throw std::invalid_argument("simulate_mimo: input dimension mismatch");

    Matrix clean = Matrix::Zero(l, std::max<long>(n, 1));
    std::vector<double> delayed(static_cast<std::size_t>(std::max<long>(n, 1)));
    for (Index output = 0; output < l; ++output) {
        for (Index input = 0; input < m; ++input) {
            const RationalChannel& ch = sys.channel(output, input);
            for (long k = 0; k < n; ++k) {
                const long src = k - ch.delay.at(k);
                delayed[static_cast<std::size_t>(k)] = src >= 0 ? inputs[src](input) : 0.0;
            }
            const auto& b = ch.numerator;
            const auto& a = ch.denominator;
            std::vector<double> v(static_cast<std::size_t>(n), 0.0);
            for (long k = 0; k < n; ++k) {
                double acc = 0.0;
                for (std::size_t s = 1; s <= b.size(); ++s)
                    if (k >= static_cast<long>(s)) acc += b[s - 1] * delayed[k - s];
                for (std::size_t s = 1; s < a.size(); ++s)
                    if (k >= static_cast<long>(s)) acc -= a[s] * v[k - s];
                v[static_cast<std::size_t>(k)] = acc;
                clean(output, k) += acc;
            }
        }
    }

    // noise drawn in (sample, output) order from one stream, so realizations
    // with different levels but one seed share the underlying normals
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Sample> out(static_cast<std::size_t>(n));
    for (long k = 0; k < n; ++k) {
        Vector y(l);
        for (Index output = 0; output < l; ++output)
            y(output) = clean(output, k) + sys.noise_std()(output) * normal(rng);
        out[static_cast<std::size_t>(k)] = {inputs[static_cast<std::size_t>(k)], y};
    }
    return out;
}

/// One autoregressive mode of a switched scalar model:
/// y(k) = sum_j ar[j-1] y(k-j) + sum_s ex[s-1] u(k-s-delay) + noise.
struct SarxMode {
    std::vector<double> ar;
    std::vector<double> ex;
    Index delay = 0;

    void validate() const {
        if (ex.empty()) throw std::invalid_argument("SarxMode: empty input polynomial");
        if (delay < 0) throw std::invalid_argument("SarxMode: negative delay");
        // stability of y(k) - sum ar[j-1] y(k-j): roots of z^n - ar[0] z^(n-1) - ...
        std::vector<double> c(ar.size());
        for (std::size_t j = 0; j < ar.size(); ++j) c[j] = -ar[j];
        if (detail::max_root_magnitude(c) >= 1.0)
            throw std::invalid_argument("SarxMode: unstable autoregression");
    }
};

/// Switched ARX model: `switches` selects the active mode index per sample.
class SarxModel {
public:
    SarxModel(std::vector<SarxMode> modes, StepSchedule switches)
        : modes_(std::move(modes)), switches_(std::move(switches)) {
        if (modes_.empty()) throw std::invalid_argument("SarxModel: no modes");
        for (const SarxMode& mode : modes_) mode.validate();
        for (Index v : switches_.values())
            if (v < 0 || v >= static_cast<Index>(modes_.size()))
                throw std::out_of_range("SarxModel: switch schedule names a mode that "
                                        "does not exist");
    }

    const SarxMode& mode(Index idx) const { return modes_[static_cast<std::size_t>(idx)]; }
    Index num_modes() const { return static_cast<Index>(modes_.size()); }
    const StepSchedule& switches() const { return switches_; }

    Index true_delay(long k) const { return mode(switches_.at(k)).delay; }

    Index max_delay() const {
        Index d = 0;
        for (const SarxMode& mode : modes_) d = std::max(d, mode.delay);
        return d;
    }

private:
    std::vector<SarxMode> modes_;
    StepSchedule switches_;
};

struct SarxSimulation {
    std::vector<Sample> samples;      // scalar u and y wrapped as 1-vectors
    std::vector<Index> true_delay;    // active mode's delay per sample
};

/// Simulates the switched model from zero initial conditions with seeded
/// Gaussian output noise.
inline SarxSimulation simulate_sarx(const SarxModel& model,
                                    const std::vector<double>& inputs, double noise_std,
                                    std::uint64_t seed) {
    if (noise_std < 0.0)
        throw std::invalid_argument("simulate_sarx: negative noise level");
    const long n = static_cast<long>(inputs.size());
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);

    SarxSimulation out;
    out.samples.resize(static_cast<std::size_t>(n));
    out.true_delay.resize(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    for (long k = 0; k < n; ++k) {
        const SarxMode& mode = model.mode(model.switches().at(k));
        double acc = 0.0;
        for (std::size_t j = 1; j <= mode.ar.size(); ++j)
            if (k >= static_cast<long>(j)) acc += mode.ar[j - 1] * y[k - j];
        for (std::size_t s = 1; s <= mode.ex.size(); ++s) {
            const long src = k - static_cast<long>(s) - mode.delay;
            if (src >= 0) acc += mode.ex[s - 1] * inputs[static_cast<std::size_t>(src)];
        }
        acc += noise_std * normal(rng);
        y[static_cast<std::size_t>(k)] = acc;
        out.samples[static_cast<std::size_t>(k)] = {Vector::Constant(1, inputs[k]),
                                                    Vector::Constant(1, acc)};
        out.true_delay[static_cast<std::size_t>(k)] = mode.delay;
    }
    return out;
}

namespace detail {

/// Feedback tap positions giving maximal-length sequences, indexed by
/// register length (Fibonacci form, taps counted 1..n from the newest bit).
inline std::vector<int> standard_taps(int register_length) {
    switch (register_length) {
        case 2: return {2, 1};
        case 3: return {3, 2};
        case 4: return {4, 3};
        case 5: return {5, 3};
        case 6: return {6, 5};
        case 7: return {7, 6};
        case 8: return {8, 6, 5, 4};
        case 9: return {9, 5};
        case 10: return {10, 7};
        case 11: return {11, 9};
        case 12: return {12, 11, 10, 4};
        case 13: return {13, 12, 11, 8};
        case 14: return {14, 13, 12, 2};
        case 15: return {15, 14};
        case 16: return {16, 15, 13, 4};
        default:
            throw std::invalid_argument("prbs: no standard taps for register length " +
                                        std::to_string(register_length) +
                                        " (supported: 2..16)");
    }
}

}  // namespace detail

/// Specification of a deterministic excitation signal.
struct ExcitationSpec {
    enum class Kind { prbs, gaussian };
    Kind kind = Kind::prbs;
    Index length = 0;
    /// prbs: output levels are +-amplitude; gaussian: standard deviation.
    double amplitude = 1.0;
    std::uint64_t seed = 0;  ///< prbs: register phase; gaussian: stream seed
    int register_length = 11;
    /// empty selects the standard maximal taps for register_length;
    /// custom taps are verified to generate a maximal-length sequence.
    std::vector<int> taps;
};

/// Pseudo-random binary sequence from a linear feedback shift register.
/// The sequence has period 2^register_length - 1 and levels +-amplitude.
inline std::vector<double> prbs(const ExcitationSpec& spec) {
    const int n = spec.register_length;
    if (n < 2 || n > 24)
        throw std::invalid_argument("prbs: register length must lie in [2, 24]");
    if (spec.length < 0) throw std::invalid_argument("prbs: negative length");
    std::vector<int> taps = spec.taps.empty() ? detail::standard_taps(n) : spec.taps;
    for (int t : taps)
        if (t < 1 || t > n)
            throw std::invalid_argument("prbs: tap positions must lie in [1, register length]");

    const std::uint64_t mask = (1ull << n) - 1;
    const auto step = [&](std::uint64_t state) {
        std::uint64_t fb = 0;
        for (int t : taps) fb ^= (state >> (t - 1)) & 1ull;
        return ((state << 1) | fb) & mask;
    };

    if (!spec.taps.empty()) {
        // custom taps: verify maximality by walking the cycle from state 1
        std::uint64_t s = 1;
        std::uint64_t period = 0;
        do {
            s = step(s);
            ++period;
        } while (s != 1 && period <= mask);
        if (period != mask)
            throw std::invalid_argument("prbs: tap set does not generate a maximal-length "
                                        "sequence");
    }

    std::uint64_t state = (spec.seed % mask) + 1;  // any nonzero phase
    std::vector<double> out(static_cast<std::size_t>(spec.length));
    for (auto& v : out) {
        v = (state >> (n - 1)) & 1ull ? spec.amplitude : -spec.amplitude;
        state = step(state);
    }
    return out;
}

/// Seeded white Gaussian sequence with standard deviation spec.amplitude.
inline std::vector<double> gaussian_sequence(const ExcitationSpec& spec) {
    if (spec.length < 0) throw std::invalid_argument("gaussian_sequence: negative length");
    if (spec.amplitude < 0.0)
        throw std::invalid_argument("gaussian_sequence: negative standard deviation");
    std::vector<double> out(static_cast<std::size_t>(spec.length), 0.0);
    if (spec.amplitude == 0.0) return out;
    std::mt19937_64 rng(mix_seed(spec.seed, 0));
    std::normal_distribution<double> normal(0.0, spec.amplitude);
    for (auto& v : out) v = normal(rng);
    return out;
}

}  // namespace delayest
