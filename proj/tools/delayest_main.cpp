// Command line front end: simulate benchmark systems, run the streaming
// delay estimator over CSV records, and score trajectories against ground
// truth. Exit codes: 0 success, 2 usage, 3 unreadable or malformed data,
// 4 numerical failure inside the estimator.

#include <CLI11.hpp>

#include <delayest/delayest.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace {

using namespace delayest;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string with_suffix(const std::string& path, const std::string& suffix) {
    const std::string csv = ".csv";
    if (path.size() > csv.size() && path.ends_with(csv))
        return path.substr(0, path.size() - csv.size()) + suffix;
    return path + suffix;
}

struct SimulateOptions {
    std::string preset;
    std::string out;
    std::string truth_out;
    std::uint64_t seed = 1;
    std::optional<double> noise_std;
};

struct SimulatedData {
    std::vector<Sample> samples;
    TruthRecord truth;
    EstimatorConfig config;
    Index bootstrap_rows = 0;
};

SimulatedData make_preset_data(const std::string& preset, std::uint64_t seed,
                               std::optional<double> noise_std) {
    SimulatedData out;
    if (preset == "example1") {
        const MimoDemo demo = example1_preset();
        const Index n = demo.length;
        MimoDelayedSystem system =
            noise_std ? demo.system.with_noise(
                            Vector::Constant(demo.system.num_outputs(), *noise_std))
                      : demo.system;
        out.samples = simulate_mimo(system, demo.make_inputs(n, seed), seed);
        out.truth.num_inputs = system.num_inputs();
        out.truth.num_outputs = system.num_outputs();
        for (Index k = 0; k < n; ++k) {
            std::vector<Index> row;
            for (Index output = 0; output < system.num_outputs(); ++output)
                for (Index input = 0; input < system.num_inputs(); ++input)
                    row.push_back(system.true_delay(output, input, k));
            out.truth.rows.push_back(std::move(row));
        }
        out.config = demo.config;
        out.bootstrap_rows = demo.bootstrap_rows;
    } else if (preset == "example2") {
        const SarxDemo demo = example2_preset();
        const Index n = demo.length;
        const double sigma = noise_std ? *noise_std : demo.noise_std;
        SarxSimulation sim =
            simulate_sarx(demo.model, demo.make_inputs(n, seed), sigma, seed);
        out.samples = std::move(sim.samples);
        out.truth.num_inputs = 1;
        out.truth.num_outputs = 1;
        for (Index d : sim.true_delay) out.truth.rows.push_back({d});
        out.config = demo.config;
        out.bootstrap_rows = demo.bootstrap_rows;
    } else {
        throw CLI::ValidationError("--preset", "unknown preset '" + preset + "'");
    }
    return out;
}

int run_simulate(const SimulateOptions& opt) {
    const SimulatedData data = make_preset_data(opt.preset, opt.seed, opt.noise_std);
    write_samples_csv(opt.out, data.samples, data.truth.num_inputs,
                      data.truth.num_outputs);
    std::cout << "wrote " << data.samples.size() << " samples to " << opt.out << '\n';
    if (!opt.truth_out.empty()) {
        write_truth_csv(opt.truth_out, data.truth);
        std::cout << "wrote true delays to " << opt.truth_out << '\n';
    }
    return 0;
}

struct EstimateOptions {
    std::string in;
    std::string out;
    std::string truth;
    EstimatorConfig config;
    std::optional<Index> bootstrap_rows;  // defaults to the minimum
    std::optional<Index> num_inputs, num_outputs;
    std::string criterion = "ratio";
    double threshold = 0.02;
    Index snapshot_every = 0;
    Index transient = 50;
};

struct ChannelStats {
    std::map<Index, long> histogram;
    long invalid = 0;
    long matched = 0;
    long evaluated = 0;
};

struct EstimateOutcome {
    TrajectoryRecord trajectory;
    std::vector<ChannelStats> stats;  // output-major channels
    std::string report;
    long rows = 0;
};

/// Streams the record through the estimator. One trajectory row is emitted
/// per consumed sample from the bootstrap row on, each computed before any
/// later sample is touched.
EstimateOutcome run_estimator_over(const SampleRecord& rec, const TruthRecord* truth,
                                   const EstimateOptions& opt, std::ostream* traj_out,
                                   std::ostream* snapshot_out) {
    EstimatorConfig cfg = opt.config;
    cfg.num_inputs = rec.num_inputs;
    cfg.num_outputs = rec.num_outputs;
    if (opt.num_inputs && *opt.num_inputs != rec.num_inputs)
        throw CLI::ValidationError("--m", "file has " + std::to_string(rec.num_inputs) +
                                              " input columns");
    if (opt.num_outputs && *opt.num_outputs != rec.num_outputs)
        throw CLI::ValidationError("--l", "file has " + std::to_string(rec.num_outputs) +
                                              " output columns");
    cfg.validate([](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });

    const Index rows = static_cast<Index>(rec.samples.size());
    const Index min_rows = cfg.bootstrap_samples();
    const Index boot = opt.bootstrap_rows ? *opt.bootstrap_rows : min_rows;
    if (boot < min_rows)
        throw CLI::ValidationError(
            "--N", "bootstrap needs at least data_cols + past_horizon + "
                   "future_horizon - 1 = " + std::to_string(min_rows) + " rows");
    if (rows < boot)
        throw CsvError("file has " + std::to_string(rows) +
                           " rows but the bootstrap needs " + std::to_string(boot),
                       rows + 1);
    if (truth && (truth->num_inputs != rec.num_inputs ||
                  truth->num_outputs != rec.num_outputs))
        throw CsvError("truth channel grid does not match the data dimensions", 1);

    const DelayCriterion criterion = opt.criterion == "threshold"
                                         ? DelayCriterion::threshold
                                         : DelayCriterion::ratio;

    EstimateOutcome outcome;
    outcome.rows = rows;
    outcome.stats.resize(static_cast<std::size_t>(rec.num_outputs * rec.num_inputs));
    outcome.trajectory.num_inputs = rec.num_inputs;
    outcome.trajectory.num_outputs = rec.num_outputs;

    std::optional<TrajectoryWriter> writer;
    if (traj_out) writer.emplace(*traj_out, rec.num_inputs, rec.num_outputs);

    // truth change points per channel, for transient exclusion and re-lock
    std::vector<std::vector<long>> changes(outcome.stats.size());
    if (truth)
        for (std::size_t k = 1; k < truth->rows.size(); ++k)
            for (std::size_t c = 0; c < outcome.stats.size(); ++c)
                if (truth->rows[k][c] != truth->rows[k - 1][c])
                    changes[c].push_back(static_cast<long>(k));
    std::vector<std::vector<long>> relock(outcome.stats.size());
    for (std::size_t c = 0; c < outcome.stats.size(); ++c)
        relock[c].assign(changes[c].size(), -1);

    const auto consume_row = [&](long k, const EstimatorState& state) {
        const DelayMatrix dm = estimate_delays(state, criterion, opt.threshold);
        if (writer) writer->write_row(k, dm);
        if (snapshot_out && opt.snapshot_every > 0 && k % opt.snapshot_every == 0)
            write_markov_snapshot(*snapshot_out, k, markov_estimate(state));
        outcome.trajectory.k.push_back(k);
        outcome.trajectory.rows.push_back(dm);

        for (Index output = 0; output < rec.num_outputs; ++output)
            for (Index input = 0; input < rec.num_inputs; ++input) {
                const std::size_t c = output * rec.num_inputs + input;
                ChannelStats& st = outcome.stats[c];
                const Index d = dm.delays(output, input);
                ++st.histogram[d];
                if (!dm.valid(output, input)) ++st.invalid;
                if (!truth || k >= static_cast<long>(truth->rows.size())) continue;
                const Index want = truth->rows[k][c];
                const bool match = dm.valid(output, input) && d == want;
                for (std::size_t ch = 0; ch < changes[c].size(); ++ch)
                    if (relock[c][ch] < 0 && k >= changes[c][ch] && match)
                        relock[c][ch] = k - changes[c][ch];
                bool in_transient = false;
                for (long change : changes[c])
                    if (k >= change && k < change + opt.transient) in_transient = true;
                if (in_transient) continue;
                ++st.evaluated;
                if (match) ++st.matched;
            }
    };

    EstimatorState state =
        bootstrap(std::span(rec.samples).first(boot), cfg,
                  [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });
    consume_row(boot - 1, state);
    for (Index k = boot; k < rows; ++k) {
        update(state, rec.samples[k].u, rec.samples[k].y);
        consume_row(k, state);
    }

    // assemble the report
    std::ostringstream rep;
    rep << "rows: " << rows << ", inputs: " << rec.num_inputs
        << ", outputs: " << rec.num_outputs << '\n';
    rep << "bootstrap rows: " << boot << '\n';
    rep << "settings: data_cols=" << cfg.data_cols
        << " past_horizon=" << cfg.past_horizon
        << " future_horizon=" << cfg.future_horizon
        << " forgetting=" << cfg.forgetting << " epsilon=" << cfg.criterion_epsilon
        << " max_delay=" << cfg.max_delay << " criterion=" << opt.criterion;
    if (criterion == DelayCriterion::threshold) rep << " threshold=" << opt.threshold;
    rep << '\n';
    long matched_total = 0, evaluated_total = 0;
    for (Index output = 0; output < rec.num_outputs; ++output)
        for (Index input = 0; input < rec.num_inputs; ++input) {
            const std::size_t c = output * rec.num_inputs + input;
            ChannelStats& st = outcome.stats[c];
            rep << "channel " << output + 1 << '_' << input + 1 << ":\n  delay counts:";
            for (const auto& [d, count] : st.histogram)
                rep << ' ' << d << " x" << count;
            rep << "\n  invalid estimates: " << st.invalid << '\n';
            if (truth) {
                const double pct =
                    st.evaluated ? 100.0 * st.matched / st.evaluated : 0.0;
                rep << "  truth match: " << st.matched << '/' << st.evaluated << " ("
                    << std::fixed << std::setprecision(1) << pct << "%) outside "
                    << opt.transient << "-sample transients\n";
                rep.unsetf(std::ios::fixed);
                matched_total += st.matched;
                evaluated_total += st.evaluated;
                for (std::size_t ch = 0; ch < changes[c].size(); ++ch) {
                    rep << "  re-lock after k=" << changes[c][ch] << ": ";
                    if (relock[c][ch] >= 0)
                        rep << relock[c][ch] << " samples\n";
                    else
                        rep << "not re-locked\n";
                }
            }
        }
    if (truth) {
        const double pct =
            evaluated_total ? 100.0 * matched_total / evaluated_total : 0.0;
        rep << "overall: matched " << matched_total << '/' << evaluated_total << " ("
            << std::fixed << std::setprecision(1) << pct << "%)\n";
    }
    outcome.report = rep.str();
    return outcome;
}

int run_estimate(const EstimateOptions& opt) {
    const SampleRecord rec = read_samples_csv(opt.in);
    std::optional<TruthRecord> truth;
    if (!opt.truth.empty()) truth = read_truth_csv(opt.truth);

    std::optional<std::ofstream> traj_file, snapshot_file;
    std::ostream* traj_out = nullptr;
    std::ostream* snapshot_out = nullptr;
    if (!opt.out.empty()) {
        traj_file.emplace(opt.out);
        if (!*traj_file)
            throw std::runtime_error("cannot open '" + opt.out + "' for writing");
        traj_out = &*traj_file;
        if (opt.snapshot_every > 0) {
            const std::string path = with_suffix(opt.out, ".markov.txt");
            snapshot_file.emplace(path);
            if (!*snapshot_file)
                throw std::runtime_error("cannot open '" + path + "' for writing");
            snapshot_out = &*snapshot_file;
        }
    }

    const EstimateOutcome outcome = run_estimator_over(
        rec, truth ? &*truth : nullptr, opt, traj_out, snapshot_out);

    std::cout << "input: " << opt.in << '\n' << outcome.report;
    if (!opt.out.empty()) {
        const std::string report_path = with_suffix(opt.out, ".report.txt");
        std::ofstream rep(report_path);
        if (!rep)
            throw std::runtime_error("cannot open '" + report_path + "' for writing");
        rep << "input: " << opt.in << '\n' << outcome.report;
        std::cout << "wrote trajectory to " << opt.out << " and report to "
                  << report_path << '\n';
    }
    return 0;
}

struct DemoOptions {
    std::string name;
    std::string outdir;
    std::uint64_t seed = 1;
    std::optional<double> noise_std;
};

int run_demo(const DemoOptions& opt) {
    namespace fs = std::filesystem;
    const fs::path dir = opt.outdir.empty() ? fs::path("demo_" + opt.name)
                                            : fs::path(opt.outdir);
    fs::create_directories(dir);

    const SimulatedData data = make_preset_data(opt.name, opt.seed, opt.noise_std);
    const std::string base = (dir / opt.name).string();
    write_samples_csv(base + ".csv", data.samples, data.truth.num_inputs,
                      data.truth.num_outputs);
    write_truth_csv(base + ".truth.csv", data.truth);

    EstimateOptions eopt;
    eopt.in = base + ".csv";
    eopt.out = base + ".delays.csv";
    eopt.config = data.config;
    eopt.bootstrap_rows = data.bootstrap_rows;

    SampleRecord rec;
    rec.samples = data.samples;
    rec.num_inputs = data.truth.num_inputs;
    rec.num_outputs = data.truth.num_outputs;

    std::ofstream traj(eopt.out);
    if (!traj) throw std::runtime_error("cannot open '" + eopt.out + "' for writing");
    const EstimateOutcome outcome =
        run_estimator_over(rec, &data.truth, eopt, &traj, nullptr);

    const std::string report_path = base + ".report.txt";
    std::ofstream rep(report_path);
    if (!rep) throw std::runtime_error("cannot open '" + report_path + "' for writing");
    rep << "input: " << eopt.in << '\n' << outcome.report;

    // gnuplot-style blocks: one per channel, columns k, estimate, truth
    const std::string plot_path = base + ".plot.dat";
    std::ofstream plot(plot_path);
    if (!plot) throw std::runtime_error("cannot open '" + plot_path + "' for writing");
    for (Index output = 0; output < rec.num_outputs; ++output)
        for (Index input = 0; input < rec.num_inputs; ++input) {
            plot << "# channel " << output + 1 << '_' << input + 1
                 << ": k, estimated delay, true delay\n";
            for (std::size_t r = 0; r < outcome.trajectory.k.size(); ++r) {
                const long k = outcome.trajectory.k[r];
                plot << k << ' ' << outcome.trajectory.rows[r].delays(output, input)
                     << ' '
                     << data.truth.rows[static_cast<std::size_t>(k)]
                                       [output * rec.num_inputs + input]
                     << '\n';
            }
            plot << "\n\n";
        }

    std::cout << "demo artifacts in " << dir.string() << ":\n"
              << "  " << opt.name << ".csv, " << opt.name << ".truth.csv, "
              << opt.name << ".delays.csv, " << opt.name << ".report.txt, "
              << opt.name << ".plot.dat\n\n"
              << outcome.report;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming input-delay estimation for multichannel linear systems"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an ini-style file");

    SimulateOptions sim;
    CLI::App* simulate = app.add_subcommand(
        "simulate", "generate a benchmark record as CSV");
    simulate->add_option("--preset", sim.preset, "benchmark system: example1 (2x2 "
                         "rational channels) or example2 (switched ARX)")
        ->required()
        ->check(CLI::IsMember({"example1", "example2"}));
    simulate->add_option("--out", sim.out, "output CSV path")->required();
    simulate->add_option("--truth", sim.truth_out, "also write true delays here");
    simulate->add_option("--seed", sim.seed, "random seed");
    simulate->add_option("--noise-std", sim.noise_std,
                         "override the preset output noise level")
        ->check(CLI::NonNegativeNumber);

    EstimateOptions est;
    CLI::App* estimate = app.add_subcommand(
        "estimate", "run the streaming delay estimator over a CSV record");
    estimate->set_help_flag("--help", "print this help message and exit");
    estimate->add_option("--in", est.in, "input CSV (k,u1,...,y1,...)")->required();
    estimate->add_option("--out", est.out, "delay-trajectory CSV to write");
    estimate->add_option("--j", est.config.data_cols, "regression columns")
        ->capture_default_str();
    estimate->add_option("--i", est.config.past_horizon, "past horizon (block rows)")
        ->capture_default_str();
    estimate->add_option("--h", est.config.future_horizon,
                         "future horizon (block rows)")
        ->capture_default_str();
    estimate->add_option("--N", est.bootstrap_rows,
                         "bootstrap rows (default j+i+h-1)");
    estimate->add_option("--gamma", est.config.forgetting, "forgetting factor")
        ->capture_default_str();
    estimate->add_option("--epsilon", est.config.criterion_epsilon,
                         "ratio-criterion regularizer")
        ->capture_default_str();
    estimate->add_option("--dmax", est.config.max_delay, "largest admissible delay")
        ->required();
    estimate->add_option("--criterion", est.criterion, "delay criterion")
        ->check(CLI::IsMember({"ratio", "threshold"}))
        ->capture_default_str();
    estimate->add_option("--threshold", est.threshold,
                         "level for the threshold criterion")
        ->capture_default_str();
    estimate->add_option("--snapshot-every", est.snapshot_every,
                         "dump the impulse-response estimate every this many samples");
    estimate->add_option("--truth", est.truth, "true-delay CSV to score against");
    estimate->add_option("--transient", est.transient,
                         "samples excluded from scoring after each true change")
        ->capture_default_str();
    estimate->add_option("--m", est.num_inputs, "expected input count (cross-check)");
    estimate->add_option("--l", est.num_outputs, "expected output count (cross-check)");

    DemoOptions demo;
    CLI::App* demo_cmd = app.add_subcommand(
        "demo", "simulate a preset, estimate its delays and score the result");
    demo_cmd->add_option("name", demo.name, "example1 or example2")
        ->required()
        ->check(CLI::IsMember({"example1", "example2"}));
    demo_cmd->add_option("--out", demo.outdir, "artifact directory (default demo_<name>)");
    demo_cmd->add_option("--seed", demo.seed, "random seed");
    demo_cmd->add_option("--noise-std", demo.noise_std,
                         "override the preset output noise level")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim);
        if (estimate->parsed()) return run_estimate(est);
        return run_demo(demo);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ExcitationError& e) {
        std::cerr << "error: " << e.what() << '\n'
                  << "hint: lengthen the record or excite the input more richly "
                     "(a binary or white-noise signal works well)\n";
        return kExitNumeric;
    } catch (const BreakdownError& e) {
        std::cerr << "error: " << e.what() << '\n'
                  << "hint: re-run the bootstrap on recent data, or raise the "
                     "forgetting factor toward 1\n";
        return kExitNumeric;
    } catch (const CsvError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
}
