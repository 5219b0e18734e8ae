#include <catch2/catch_amalgamated.hpp>

#include <delayest/presets.hpp>
#include <delayest/simulators.hpp>

#include <numeric>
#include <random>

using namespace delayest;

namespace {

std::vector<Vector> scalar_inputs(const std::vector<double>& u) {
    std::vector<Vector> out(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) out[k] = Vector::Constant(1, u[k]);
    return out;
}

/// Test-local impulse response of numerator/denominator dynamics, by
/// iterating the difference equation on a unit impulse.
std::vector<double> oracle_impulse(const std::vector<double>& num,
                                   const std::vector<double>& den, std::size_t taps) {
    std::vector<double> g(taps, 0.0);
    for (std::size_t k = 0; k < taps; ++k) {
        double acc = 0.0;
        for (std::size_t s = 1; s <= num.size(); ++s)
            if (k == s) acc += num[s - 1];  // impulse sits at time zero
        for (std::size_t s = 1; s < den.size(); ++s)
            if (k >= s) acc -= den[s] * g[k - s];
        g[k] = acc;
    }
    return g;
}

}  // namespace

TEST_CASE("StepSchedule switches values at its breakpoints") {
    const StepSchedule s({5, 10}, {7, 3, 9});
    REQUIRE(s.at(0) == 7);
    REQUIRE(s.at(4) == 7);
    REQUIRE(s.at(5) == 3);
    REQUIRE(s.at(9) == 3);
    REQUIRE(s.at(10) == 9);
    REQUIRE(s.at(1000) == 9);
    REQUIRE(s.max_value() == 9);

    REQUIRE(StepSchedule::constant(4).at(123) == 4);
    REQUIRE_THROWS_AS(StepSchedule({5, 2}, {1, 2, 3}), std::invalid_argument);
    REQUIRE_THROWS_AS(StepSchedule({5}, {1}), std::invalid_argument);
}

TEST_CASE("a delayed channel first responds at lag one plus its delay") {
    for (Index delay : {0, 1, 3, 6}) {
        RationalChannel ch{{0.5}, {1.0, -0.5}, StepSchedule::constant(delay)};
        MimoDelayedSystem sys(1, 1, {ch}, Vector::Zero(1));
        std::vector<Vector> step(40, Vector::Constant(1, 1.0));
        const auto out = simulate_mimo(sys, step, 0);
        for (Index k = 0; k < 1 + delay; ++k) REQUIRE(out[k].y(0) == 0.0);
        REQUIRE(out[1 + delay].y(0) != 0.0);
    }
}

TEST_CASE("the impulse response of a delayed geometric channel") {
    RationalChannel ch{{0.5}, {1.0, -0.5}, StepSchedule::constant(1)};
    MimoDelayedSystem sys(1, 1, {ch}, Vector::Zero(1));
    std::vector<Vector> impulse(8, Vector::Zero(1));
    impulse[0] = Vector::Constant(1, 1.0);
    const auto out = simulate_mimo(sys, impulse, 0);
    const double want[] = {0, 0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
    for (std::size_t k = 0; k < 8; ++k)
        REQUIRE(out[k].y(0) == Catch::Approx(want[k]).margin(1e-15));
}

TEST_CASE("the delay schedule reindexes the input sample-wise") {
    // unit one-step channel: y(k) = x(k - 1) with x(k) = u(k - delay(k))
    RationalChannel ch{{1.0}, {1.0}, StepSchedule({5}, {0, 2})};
    MimoDelayedSystem sys(1, 1, {ch}, Vector::Zero(1));
    std::vector<double> ramp(12);
    std::iota(ramp.begin(), ramp.end(), 0.0);
    const auto out = simulate_mimo(sys, scalar_inputs(ramp), 0);
    for (long k = 1; k < 12; ++k) {
        const long src = (k - 1) - (k - 1 >= 5 ? 2 : 0);
        const double want = src >= 0 ? static_cast<double>(src) : 0.0;
        REQUIRE(out[k].y(0) == want);
    }
}

TEST_CASE("frozen-delay simulation matches a convolution oracle") {
    const std::vector<double> num1{0.5, 0.2}, den1{1.0, -0.6};
    const std::vector<double> num2{1.0}, den2{1.0, 0.3, 0.1};
    MimoDelayedSystem sys(2, 1,
                          {RationalChannel{num1, den1, StepSchedule::constant(0)},
                           RationalChannel{num2, den2, StepSchedule::constant(0)}},
                          Vector::Zero(2));

    std::mt19937_64 rng(9);
    std::vector<double> u(150);
    for (auto& v : u) v = (rng() & 1) ? 1.0 : -1.0;
    const auto out = simulate_mimo(sys, scalar_inputs(u), 0);

    const auto g1 = oracle_impulse(num1, den1, 200);
    const auto g2 = oracle_impulse(num2, den2, 200);
    for (std::size_t k = 0; k < u.size(); ++k) {
        double want1 = 0.0, want2 = 0.0;
        for (std::size_t tau = 0; tau <= k; ++tau) {
            want1 += g1[tau] * u[k - tau];
            want2 += g2[tau] * u[k - tau];
        }
        REQUIRE(out[k].y(0) == Catch::Approx(want1).margin(1e-8));
        REQUIRE(out[k].y(1) == Catch::Approx(want2).margin(1e-8));
    }
}

TEST_CASE("channel outputs superpose across inputs") {
    const RationalChannel a{{0.7, -0.2}, {1.0, -0.4}, StepSchedule::constant(1)};
    const RationalChannel b{{1.0}, {1.0, 0.5}, StepSchedule::constant(3)};
    MimoDelayedSystem joint(1, 2, {a, b}, Vector::Zero(1));
    MimoDelayedSystem only_a(1, 1, {a}, Vector::Zero(1));
    MimoDelayedSystem only_b(1, 1, {b}, Vector::Zero(1));

    std::mt19937_64 rng(31);
    std::normal_distribution<double> normal;
    std::vector<Vector> u(60), u1(60), u2(60);
    for (std::size_t k = 0; k < u.size(); ++k) {
        u[k] = Vector(2);
        u[k] << normal(rng), normal(rng);
        u1[k] = u[k].head(1);
        u2[k] = u[k].tail(1);
    }
    const auto yj = simulate_mimo(joint, u, 0);
    const auto ya = simulate_mimo(only_a, u1, 0);
    const auto yb = simulate_mimo(only_b, u2, 0);
    for (std::size_t k = 0; k < u.size(); ++k)
        REQUIRE(yj[k].y(0) ==
                Catch::Approx(ya[k].y(0) + yb[k].y(0)).margin(1e-12));
}

TEST_CASE("simulation is deterministic and noise scales linearly in sigma") {
    RationalChannel ch{{1.0, 0.4}, {1.0, -0.3}, StepSchedule::constant(2)};
    std::vector<Vector> u;
    std::mt19937_64 rng(3);
    for (int k = 0; k < 80; ++k)
        u.push_back(Vector::Constant(1, (rng() & 1) ? 1.0 : -1.0));

    MimoDelayedSystem clean_sys(1, 1, {ch}, Vector::Zero(1));
    MimoDelayedSystem noisy(1, 1, {ch}, Vector::Constant(1, 0.2));
    MimoDelayedSystem half(1, 1, {ch}, Vector::Constant(1, 0.1));

    const auto c = simulate_mimo(clean_sys, u, 42);
    const auto n1 = simulate_mimo(noisy, u, 42);
    const auto n2 = simulate_mimo(noisy, u, 42);
    const auto h = simulate_mimo(half, u, 42);
    double max_noise = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        REQUIRE(n1[k].y(0) == n2[k].y(0));  // bit-identical reruns
        // same underlying draws: halving sigma halves the deviation exactly
        REQUIRE(n1[k].y(0) - c[k].y(0) ==
                Catch::Approx(2.0 * (h[k].y(0) - c[k].y(0))).margin(1e-14));
        max_noise = std::max(max_noise, std::abs(n1[k].y(0) - c[k].y(0)));
    }
    REQUIRE(max_noise > 0.0);

    const auto other_seed = simulate_mimo(noisy, u, 43);
    bool differs = false;
    for (std::size_t k = 0; k < u.size(); ++k)
        if (other_seed[k].y(0) != n1[k].y(0)) differs = true;
    REQUIRE(differs);
}

TEST_CASE("system construction rejects bad channels") {
    // pole outside the unit circle
    REQUIRE_THROWS_AS(
        MimoDelayedSystem(1, 1, {RationalChannel{{1.0}, {1.0, -1.2}, {}}},
                          Vector::Zero(1)),
        std::invalid_argument);
    // pole on the unit circle
    REQUIRE_THROWS_AS(
        MimoDelayedSystem(1, 1, {RationalChannel{{1.0}, {1.0, -1.0}, {}}},
                          Vector::Zero(1)),
        std::invalid_argument);
    // denominator not monic
    REQUIRE_THROWS_AS(
        MimoDelayedSystem(1, 1, {RationalChannel{{1.0}, {2.0, 0.5}, {}}},
                          Vector::Zero(1)),
        std::invalid_argument);
    // empty numerator
    REQUIRE_THROWS_AS(
        MimoDelayedSystem(1, 1, {RationalChannel{{}, {1.0}, {}}}, Vector::Zero(1)),
        std::invalid_argument);
    // negative delay
    REQUIRE_THROWS_AS(
        MimoDelayedSystem(1, 1,
                          {RationalChannel{{1.0}, {1.0}, StepSchedule::constant(-1)}},
                          Vector::Zero(1)),
        std::invalid_argument);
    // wrong channel count
    REQUIRE_THROWS_AS(MimoDelayedSystem(2, 2,
                                        {RationalChannel{{1.0}, {1.0}, {}},
                                         RationalChannel{{1.0}, {1.0}, {}}},
                                        Vector::Zero(2)),
                      std::invalid_argument);
    // negative noise level
    REQUIRE_THROWS_AS(
        MimoDelayedSystem(1, 1, {RationalChannel{{1.0}, {1.0}, {}}},
                          Vector::Constant(1, -0.1)),
        std::invalid_argument);
}

TEST_CASE("switched ARX simulation matches a direct recursion oracle") {
    SarxModel model({SarxMode{{0.5}, {1.0, -0.3}, 0}, SarxMode{{-0.4, 0.1}, {2.0}, 2}},
                    StepSchedule({20}, {0, 1}));
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal;
    std::vector<double> u(50);
    for (auto& v : u) v = normal(rng);

    const auto sim = simulate_sarx(model, u, 0.0, 0);
    std::vector<double> y(u.size(), 0.0);
    for (long k = 0; k < static_cast<long>(u.size()); ++k) {
        const bool late = k >= 20;
        double acc = 0.0;
        if (!late) {
            if (k >= 1) acc += 0.5 * y[k - 1];
            if (k >= 1) acc += 1.0 * u[k - 1];
            if (k >= 2) acc += -0.3 * u[k - 2];
        } else {
            if (k >= 1) acc += -0.4 * y[k - 1];
            if (k >= 2) acc += 0.1 * y[k - 2];
            if (k >= 3) acc += 2.0 * u[k - 3];  // one-step lag plus delay 2
        }
        y[k] = acc;
        REQUIRE(sim.samples[k].y(0) == Catch::Approx(acc).margin(1e-12));
        REQUIRE(sim.samples[k].u(0) == u[k]);
        REQUIRE(sim.true_delay[k] == (late ? 2 : 0));
    }

    // seeded noise is reproducible
    const auto a = simulate_sarx(model, u, 0.1, 5);
    const auto b = simulate_sarx(model, u, 0.1, 5);
    for (std::size_t k = 0; k < u.size(); ++k)
        REQUIRE(a.samples[k].y(0) == b.samples[k].y(0));
}

TEST_CASE("switched ARX model validation") {
    // unstable autoregression
    REQUIRE_THROWS_AS(SarxModel({SarxMode{{1.1}, {1.0}, 0}}, {}), std::invalid_argument);
    // schedule naming a missing mode
    REQUIRE_THROWS_AS(SarxModel({SarxMode{{0.5}, {1.0}, 0}}, StepSchedule({5}, {0, 1})),
                      std::out_of_range);
    // no modes at all
    REQUIRE_THROWS_AS(SarxModel({}, {}), std::invalid_argument);
    // negative delay
    REQUIRE_THROWS_AS(SarxModel({SarxMode{{0.5}, {1.0}, -1}}, {}), std::invalid_argument);
}

TEST_CASE("prbs generates a maximal-length binary sequence") {
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::prbs;
    spec.register_length = 11;
    spec.amplitude = 1.0;
    spec.seed = 0;
    spec.length = 2 * 2047 + 50;
    const auto s = prbs(spec);

    for (double v : s) REQUIRE(std::abs(v) == 1.0);
    // period exactly 2047: repeats at 2047 and at no proper divisor (1, 23, 89)
    for (std::size_t k = 0; k + 2047 < s.size(); ++k) REQUIRE(s[k] == s[k + 2047]);
    for (std::size_t p : {std::size_t{1}, std::size_t{23}, std::size_t{89}}) {
        bool differs = false;
        for (std::size_t k = 0; k + p < 2047; ++k)
            if (s[k] != s[k + p]) differs = true;
        REQUIRE(differs);
    }

    // one period is nearly balanced and has the two-level autocorrelation
    double sum = 0.0;
    for (std::size_t k = 0; k < 2047; ++k) sum += s[k];
    REQUIRE(std::abs(sum) == 1.0);
    for (std::size_t lag : {1, 7, 100}) {
        double corr = 0.0;
        for (std::size_t k = 0; k < 2047; ++k) corr += s[k] * s[(k + lag) % 2047];
        REQUIRE(corr == Catch::Approx(-1.0).margin(1e-12));
    }
}

TEST_CASE("prbs phase follows the seed and the sequence stays periodic") {
    ExcitationSpec spec;
    spec.register_length = 5;  // period 31
    spec.length = 62;
    spec.seed = 0;
    const auto base = prbs(spec);
    spec.seed = 17;
    const auto shifted = prbs(spec);
    REQUIRE(base != shifted);
    // same cycle: the shifted stream appears somewhere inside two periods
    bool found = false;
    for (std::size_t off = 0; off < 31 && !found; ++off) {
        bool match = true;
        for (std::size_t k = 0; k < 31; ++k)
            if (shifted[k] != base[(k + off) % 31]) match = false;
        found = match;
    }
    REQUIRE(found);
}

TEST_CASE("prbs rejects non-maximal taps and bad parameters") {
    ExcitationSpec spec;
    spec.register_length = 5;
    spec.length = 10;
    spec.taps = {5, 1};  // x^5 + x + 1 factors, so the cycle is short
    REQUIRE_THROWS_AS(prbs(spec), std::invalid_argument);

    spec.taps = {5, 3};  // the standard pair passes the explicit check
    REQUIRE_NOTHROW(prbs(spec));

    spec.taps = {6};
    REQUIRE_THROWS_AS(prbs(spec), std::invalid_argument);
    spec.taps.clear();
    spec.register_length = 1;
    REQUIRE_THROWS_AS(prbs(spec), std::invalid_argument);
    spec.register_length = 40;
    REQUIRE_THROWS_AS(prbs(spec), std::invalid_argument);
}

TEST_CASE("gaussian_sequence is seeded white noise") {
    ExcitationSpec spec;
    spec.kind = ExcitationSpec::Kind::gaussian;
    spec.length = 5000;
    spec.amplitude = 2.0;
    spec.seed = 9;
    const auto a = gaussian_sequence(spec);
    const auto b = gaussian_sequence(spec);
    REQUIRE(a == b);

    double mean = 0.0, var = 0.0;
    for (double v : a) mean += v;
    mean /= a.size();
    for (double v : a) var += (v - mean) * (v - mean);
    var /= a.size();
    REQUIRE(std::abs(mean) < 0.1);
    REQUIRE(var == Catch::Approx(4.0).epsilon(0.1));

    spec.amplitude = 0.0;
    for (double v : gaussian_sequence(spec)) REQUIRE(v == 0.0);
}

TEST_CASE("the MIMO demo preset matches its published schedules") {
    const MimoDemo demo = example1_preset();
    REQUIRE(demo.system.num_inputs() == 2);
    REQUIRE(demo.system.num_outputs() == 2);
    REQUIRE(demo.length == 2000);
    REQUIRE(demo.bootstrap_rows == 115);
    REQUIRE(demo.system.max_delay() == 6);

    const Index want_start[2][2] = {{6, 1}, {1, 5}};
    const Index want_mid[2][2] = {{2, 5}, {1, 2}};
    const Index want_late[2][2] = {{2, 2}, {4, 1}};
    for (Index output = 0; output < 2; ++output)
        for (Index input = 0; input < 2; ++input) {
            REQUIRE(demo.system.true_delay(output, input, 0) ==
                    want_start[output][input]);
            REQUIRE(demo.system.true_delay(output, input, 600) ==
                    want_mid[output][input]);
            REQUIRE(demo.system.true_delay(output, input, 1600) ==
                    want_late[output][input]);
        }

    REQUIRE(demo.config.num_inputs == 2);
    REQUIRE(demo.config.num_outputs == 2);
    REQUIRE(demo.config.data_cols == 100);
    REQUIRE(demo.config.past_horizon == 8);
    REQUIRE(demo.config.future_horizon == 8);
    REQUIRE(demo.config.forgetting == 0.9);
    REQUIRE(demo.config.max_delay == 6);
    REQUIRE_NOTHROW(demo.config.validate());

    const auto u = demo.make_inputs(500, 1);
    const auto u_again = demo.make_inputs(500, 1);
    REQUIRE(u.size() == 500);
    bool channels_differ = false;
    for (std::size_t k = 0; k < u.size(); ++k) {
        REQUIRE(std::abs(u[k](0)) == 1.0);
        REQUIRE(std::abs(u[k](1)) == 1.0);
        REQUIRE(u[k] == u_again[k]);
        if (u[k](0) != u[k](1)) channels_differ = true;
    }
    REQUIRE(channels_differ);
}

TEST_CASE("the switched-ARX demo preset cycles through the mode delays") {
    const SarxDemo demo = example2_preset();
    REQUIRE(demo.model.num_modes() == 3);
    REQUIRE(demo.length == 2000);
    REQUIRE(demo.bootstrap_rows == 100);
    REQUIRE(demo.noise_std == 0.05);
    REQUIRE(demo.model.max_delay() == 4);

    // eight 250-sample segments with delays 4,3,4,1,3,4,1,3
    const Index want[] = {4, 3, 4, 1, 3, 4, 1, 3};
    for (int seg = 0; seg < 8; ++seg) {
        REQUIRE(demo.model.true_delay(250L * seg) == want[seg]);
        REQUIRE(demo.model.true_delay(250L * seg + 249) == want[seg]);
    }

    REQUIRE(demo.config.data_cols == 78);
    REQUIRE(demo.config.past_horizon == 11);
    REQUIRE(demo.config.future_horizon == 12);
    REQUIRE(demo.config.forgetting == 0.8);
    REQUIRE(demo.config.max_delay == 4);
    REQUIRE_NOTHROW(demo.config.validate());

    const auto u = demo.make_inputs(demo.length, 3);
    REQUIRE(u.size() == 2000);
    double var = 0.0;
    for (double v : u) var += v * v;
    REQUIRE(var / u.size() == Catch::Approx(1.0).epsilon(0.1));
}
