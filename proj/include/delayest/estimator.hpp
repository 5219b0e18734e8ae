#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matrix_kernels.hpp"

namespace delayest {

/// Receives non-fatal diagnostics (weak excitation, short data windows).
using WarnSink = std::function<void(const std::string&)>;

/// Shape and tuning of the streaming Markov-parameter estimator.
///
/// The estimator regresses stacked future outputs on stacked future inputs
/// while projecting out `past_horizon` blocks of past inputs and outputs,
/// so each processed sample contributes one column built from the most
/// recent past_horizon + future_horizon samples.
struct EstimatorConfig {
    Index num_inputs = 1;
    Index num_outputs = 1;
    Index data_cols = 100;     ///< regression columns used by bootstrap / batch
    Index past_horizon = 8;    ///< past block rows projected out
    Index future_horizon = 8;  ///< future block rows; Markov parameters recovered
    double forgetting = 0.95;  ///< exponential forgetting factor in (0, 1]
    double criterion_epsilon = 1e-5;  ///< regularizer of the ratio criterion
    Index max_delay = 0;       ///< largest admissible delay

    Index future_input_dim() const { return future_horizon * num_inputs; }
    Index future_output_dim() const { return future_horizon * num_outputs; }
    Index past_dim() const { return past_horizon * (num_inputs + num_outputs); }

    /// Samples needed to fill every column of the bootstrap regression.
    Index bootstrap_samples() const {
        return data_cols + past_horizon + future_horizon - 1;
    }

    void validate(const WarnSink& warn = {}) const {
        if (num_inputs < 1 || num_outputs < 1)
            throw std::invalid_argument("config: num_inputs and num_outputs must be positive");
        if (data_cols < 1 || past_horizon < 1 || future_horizon < 1)
            throw std::invalid_argument("config: data_cols, past_horizon and future_horizon "
                                        "must be positive");
        if (max_delay < 0)
            throw std::invalid_argument("config: max_delay must be non-negative");
        if (future_horizon < max_delay + 2)
            throw std::invalid_argument("config: future_horizon must be at least max_delay + 2 "
                                        "so the delay criteria can scan past the largest delay");
        if (!(forgetting > 0.0) || forgetting > 1.0)
            throw std::invalid_argument("config: forgetting factor must lie in (0, 1]");
        if (!(criterion_epsilon > 0.0))
            throw std::invalid_argument("config: criterion_epsilon must be positive");
        if (warn && data_cols < 5 * past_horizon)
            warn("config: data_cols < 5 * past_horizon; bootstrap estimates may be poor");
    }
};

struct Sample {
    Vector u;
    Vector y;
};

/// Fixed-capacity chronological buffer of the most recent samples, tagged
/// with the absolute index of the newest one.
class DataWindow {
public:
    DataWindow() = default;
    explicit DataWindow(Index capacity) : capacity_(capacity) {}

    Index capacity() const { return capacity_; }
    Index size() const { return static_cast<Index>(buf_.size()); }
    long newest_index() const { return newest_; }
    void set_newest_index(long k) { newest_ = k; }

    void push(Sample s) {
        if (capacity_ < 1) throw std::logic_error("DataWindow: zero capacity");
        if (size() == capacity_) buf_.pop_front();
        buf_.push_back(std::move(s));
        ++newest_;
    }

    /// age 0 is the newest sample, age size()-1 the oldest retained.
    const Sample& from_newest(Index age) const {
        if (age < 0 || age >= size())
            throw std::out_of_range("DataWindow: age out of range");
        return buf_[buf_.size() - 1 - static_cast<std::size_t>(age)];
    }

private:
    Index capacity_ = 0;
    std::deque<Sample> buf_;
    long newest_ = -1;
};

/// Estimated Markov parameters of the future-input block regression.
/// `toeplitz()` is the full (future_output_dim x future_input_dim) estimate;
/// the leading block column stacks the impulse-response matrices at lags
/// 0, 1, ..., future_horizon - 1 (lag 0 is the feedthrough, which vanishes
/// for strictly proper systems).
class MarkovEstimate {
public:
    MarkovEstimate(Matrix psi, Index num_inputs, Index num_outputs, Index horizon)
        : psi_(std::move(psi)),
          num_inputs_(num_inputs),
          num_outputs_(num_outputs),
          horizon_(horizon) {
        if (psi_.rows() != horizon_ * num_outputs_ || psi_.cols() != horizon_ * num_inputs_)
            throw std::invalid_argument("MarkovEstimate: matrix shape does not match "
                                        "the declared dimensions");
    }

    const Matrix& toeplitz() const { return psi_; }
    Index num_inputs() const { return num_inputs_; }
    Index num_outputs() const { return num_outputs_; }
    Index horizon() const { return horizon_; }

    /// First block column: the stacked impulse-response matrices.
    Matrix first_block_column() const { return psi_.leftCols(num_inputs_); }

    /// Impulse response of one input/output channel across the horizon:
    /// entry r is the estimated response at lag r.
    Vector channel_vector(Index output, Index input) const {
        if (output < 0 || output >= num_outputs_ || input < 0 || input >= num_inputs_)
            throw std::out_of_range("MarkovEstimate: channel index out of range");
        Vector v(horizon_);
        for (Index r = 0; r < horizon_; ++r)
            v(r) = psi_(r * num_outputs_ + output, input);
        return v;
    }

private:
    Matrix psi_;
    Index num_inputs_, num_outputs_, horizon_;
};

/// Running state of the streaming estimator: the Gram matrix of the stacked
/// future inputs together with its tracked inverse, the four cross-product
/// accumulators that the Markov extraction needs, and the trailing sample
/// window that future regression columns are built from.
struct EstimatorState {
    EstimatorConfig config;
    Matrix input_gram;          ///< weighted sum of future-input outer products
    Matrix input_gram_inv;      ///< tracked inverse of input_gram
    Matrix past_future_cross;   ///< past stack x future inputs^T
    Matrix out_future_cross;    ///< future outputs x future inputs^T
    Matrix past_gram;           ///< past stack x past stack^T
    Matrix out_past_cross;      ///< future outputs x past stack^T
    DataWindow window;
    long time = -1;             ///< absolute index of the newest consumed sample
    Index updates_since_refresh = 0;  ///< see the drift-control note in update()

    bool bootstrapped() const { return input_gram_inv.size() > 0; }
};

struct PeCheck {
    bool is_pe;
    double min_eigenvalue;
};

/// Persistent-excitation diagnostic: assembles the block-Toeplitz matrix of
/// sample covariances up to lag `order - 1` and checks its smallest
/// eigenvalue. The estimate is only meaningful when the data is several
/// times longer than the order.
inline PeCheck pe_order_check(std::span<const Vector> inputs, Index order,
                              double tol = 1e-6) {
    const Index n = static_cast<Index>(inputs.size());
    if (order < 1) throw std::invalid_argument("pe_order_check: order must be positive");
    if (n < order + 1)
        throw std::invalid_argument("pe_order_check: need more samples than the order");
    const Index m = inputs[0].size();

    Vector mean = Vector::Zero(m);
    for (const Vector& u : inputs) {
        if (u.size() != m)
            throw std::invalid_argument("pe_order_check: samples have mixed dimensions");
        mean += u;
    }
    mean /= static_cast<double>(n);

    std::vector<Matrix> cov(order, Matrix::Zero(m, m));
    for (Index tau = 0; tau < order; ++tau) {
        for (Index t = tau; t < n; ++t)
            cov[tau] += (inputs[t] - mean) * (inputs[t - tau] - mean).transpose();
        cov[tau] /= static_cast<double>(n - tau);
    }

    Matrix toep(order * m, order * m);
    for (Index a = 0; a < order; ++a)
        for (Index b = 0; b < order; ++b)
            toep.block(a * m, b * m, m, m) =
                a >= b ? cov[a - b] : Matrix(cov[b - a].transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es(toep);
    const double min_eig = es.eigenvalues()(0);
    return {min_eig > tol, min_eig};
}

namespace detail {

struct HankelStacks {
    Matrix future_inputs;   // future_input_dim  x data_cols
    Matrix past_stack;      // past_dim          x data_cols
    Matrix future_outputs;  // future_output_dim x data_cols
};

/// Builds the three regression stacks from the trailing
/// bootstrap_samples() entries of `data`.
inline HankelStacks build_stacks(std::span<const Sample> data, const EstimatorConfig& cfg) {
    const Index need = cfg.bootstrap_samples();
    const Index off = static_cast<Index>(data.size()) - need;
    std::vector<Vector> us(need), ys(need);
    for (Index t = 0; t < need; ++t) {
        const Sample& s = data[off + t];
        if (s.u.size() != cfg.num_inputs || s.y.size() != cfg.num_outputs)
            throw std::invalid_argument("estimator: sample dimensions do not match the config");
        if (!s.u.allFinite() || !s.y.allFinite())
            throw std::invalid_argument("estimator: non-finite sample");
        us[t] = s.u;
        ys[t] = s.y;
    }
    const Index i = cfg.past_horizon, h = cfg.future_horizon, j = cfg.data_cols;
    HankelStacks st;
    st.future_inputs = block_hankel(us, i, h, j);
    st.future_outputs = block_hankel(ys, i, h, j);
    Matrix up = block_hankel(us, 0, i, j);
    Matrix yp = block_hankel(ys, 0, i, j);
    st.past_stack.resize(up.rows() + yp.rows(), j);
    st.past_stack << up, yp;
    return st;
}

inline void require_enough_samples(std::span<const Sample> data, const EstimatorConfig& cfg,
                                   const char* who) {
    if (static_cast<Index>(data.size()) < cfg.bootstrap_samples())
        throw std::invalid_argument(std::string(who) +
                                    ": need at least data_cols + past_horizon + "
                                    "future_horizon - 1 samples");
}

/// Updates between direct re-inversions of the tracked input Gram matrix.
/// Drift grows by at most (1/forgetting)^interval between refreshes, which
/// stays far below round-off-visible scale for any sane forgetting factor.
inline constexpr Index gram_refresh_interval = 25;

/// Symmetric PSD inverse with an excitation check: throws ExcitationError
/// when the Gram matrix is singular within tolerance, reporting the
/// excitation order the data does support (rank / inputs_per_block).
inline Matrix invert_input_gram(const Matrix& gram, Index inputs_per_block,
                                Index wanted_order) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector& ev = es.eigenvalues();  // ascending
    const Index n = ev.size();
    const double cut = default_rank_tol(n, n) * std::max(ev(n - 1), 0.0);
    if (ev(0) <= cut) {
        Index rank = 0;
        for (Index k = 0; k < n; ++k)
            if (ev(k) > cut) ++rank;
        const Index reached = rank / inputs_per_block;
        throw ExcitationError(
            "estimator: the input is not persistently exciting to order " +
                std::to_string(wanted_order) + " (roughly order " +
                std::to_string(reached) + " reached); use a richer input or a "
                "shorter future horizon",
            reached);
    }
    return es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace detail

/// Builds a streaming estimator state from an initial data record. Uses the
/// trailing bootstrap_samples() entries; the returned state is tagged with
/// absolute time data.size() - 1 and retains the trailing
/// past_horizon + future_horizon samples for subsequent updates.
inline EstimatorState bootstrap(std::span<const Sample> data, const EstimatorConfig& cfg,
                                const WarnSink& warn = {}) {
    cfg.validate(warn);
    detail::require_enough_samples(data, cfg, "bootstrap");
    detail::HankelStacks st = detail::build_stacks(data, cfg);

    // The PE diagnostic needs data several times longer than the order it
    // probes; on shorter records only the hard Gram-rank check below applies.
    const Index pe_order = cfg.past_horizon + cfg.future_horizon;
    if (warn && static_cast<Index>(data.size()) >= 10 * pe_order) {
        std::vector<Vector> us(data.size());
        for (std::size_t t = 0; t < data.size(); ++t) us[t] = data[t].u;
        const PeCheck pe = pe_order_check(us, pe_order);
        if (!pe.is_pe)
            warn("bootstrap: input fails the persistent-excitation check at order " +
                 std::to_string(pe_order) + " (min eigenvalue " +
                 std::to_string(pe.min_eigenvalue) + ")");
    }

    EstimatorState state;
    state.config = cfg;
    state.input_gram = st.future_inputs * st.future_inputs.transpose();
    state.input_gram_inv =
        detail::invert_input_gram(state.input_gram, cfg.num_inputs, cfg.future_horizon);
    state.past_future_cross = st.past_stack * st.future_inputs.transpose();
    state.out_future_cross = st.future_outputs * st.future_inputs.transpose();
    state.past_gram = st.past_stack * st.past_stack.transpose();
    state.out_past_cross = st.future_outputs * st.past_stack.transpose();

    const Index keep = cfg.past_horizon + cfg.future_horizon;
    state.window = DataWindow(keep);
    const Index off = static_cast<Index>(data.size()) - keep;
    for (Index t = 0; t < keep; ++t) state.window.push(data[off + t]);
    state.window.set_newest_index(static_cast<long>(data.size()) - 1);
    state.time = static_cast<long>(data.size()) - 1;
    return state;
}

/// Folds one new sample into the state: every accumulator is scaled by the
/// forgetting factor and receives the outer products of the newest
/// regression column, and the inverse Gram matrix is updated in place by a
/// rank-one inverse update. Cost is O(dim^2) per call.
inline void update(EstimatorState& state, const Vector& u_new, const Vector& y_new) {
    if (!state.bootstrapped())
        throw std::logic_error("update: state has not been bootstrapped");
    const EstimatorConfig& cfg = state.config;
    if (u_new.size() != cfg.num_inputs || y_new.size() != cfg.num_outputs)
        throw std::invalid_argument("update: sample dimensions do not match the config");
    if (!u_new.allFinite() || !y_new.allFinite())
        throw std::invalid_argument("update: non-finite sample");

    state.window.push({u_new, y_new});
    state.time += 1;

    const Index m = cfg.num_inputs, l = cfg.num_outputs;
    const Index i = cfg.past_horizon, h = cfg.future_horizon;

    // newest column of each stack: future spans the h newest samples,
    // past the i samples before those (oldest first in both)
    Vector uh(h * m), yh(h * l), wi(i * (m + l));
    for (Index r = 0; r < h; ++r) {
        const Sample& s = state.window.from_newest(h - 1 - r);
        uh.segment(r * m, m) = s.u;
        yh.segment(r * l, l) = s.y;
    }
    for (Index r = 0; r < i; ++r) {
        const Sample& s = state.window.from_newest(h + i - 1 - r);
        wi.segment(r * m, m) = s.u;
        wi.segment(i * m + r * l, l) = s.y;
    }

    const double g = cfg.forgetting;
    try {
        state.input_gram_inv = sherman_morrison_update(state.input_gram_inv, uh, g);
    } catch (const BreakdownError&) {
        throw BreakdownError("update: the tracked inverse Gram matrix lost positive "
                             "definiteness; re-bootstrap the estimator from recent data");
    }
    state.input_gram = g * state.input_gram + uh * uh.transpose();
    state.past_future_cross = g * state.past_future_cross + wi * uh.transpose();
    state.out_future_cross = g * state.out_future_cross + yh * uh.transpose();
    state.past_gram = g * state.past_gram + wi * wi.transpose();
    state.out_past_cross = g * state.out_past_cross + yh * wi.transpose();

    // The rank-one inverse update amplifies representation error by
    // 1/forgetting per step in every direction the new column leaves
    // unexcited, so for forgetting < 1 the tracked inverse drifts off the
    // true inverse geometrically no matter how well conditioned the data is.
    // The Gram recursion itself damps old error by the same factor, so a
    // periodic direct inversion keeps the pair consistent indefinitely.
    if (++state.updates_since_refresh >= detail::gram_refresh_interval) {
        state.updates_since_refresh = 0;
        Eigen::LLT<Matrix> llt(state.input_gram);
        if (llt.info() != Eigen::Success)
            throw BreakdownError("update: the input Gram matrix lost positive "
                                 "definiteness; re-bootstrap the estimator from recent data");
        const Matrix fresh = llt.solve(Matrix::Identity(uh.size(), uh.size()));
        state.input_gram_inv = 0.5 * (fresh + fresh.transpose());
    }
}

/// Extracts the Markov-parameter estimate from the current accumulators:
/// the future-output/future-input regression with the past stack projected
/// out through its Schur complement.
inline MarkovEstimate markov_estimate(const EstimatorState& state) {
    if (!state.bootstrapped())
        throw std::logic_error("markov_estimate: state has not been bootstrapped");
    const EstimatorConfig& cfg = state.config;
    const Matrix& p = state.input_gram_inv;
    const Matrix cross_p = state.past_future_cross * p;  // past x future, whitened
    const Matrix schur = state.past_gram - cross_p * state.past_future_cross.transpose();
    const Matrix gain =
        state.out_past_cross - state.out_future_cross * p * state.past_future_cross.transpose();
    Matrix psi =
        (state.out_future_cross - gain * pinv(schur) * state.past_future_cross) * p;
    if (!psi.allFinite())
        throw BreakdownError("markov_estimate: non-finite result; re-bootstrap the estimator");
    return MarkovEstimate(std::move(psi), cfg.num_inputs, cfg.num_outputs,
                          cfg.future_horizon);
}

/// One-shot batch estimate on a data record, via the LQ factorization of the
/// stacked future-input / past / future-output matrix. Algebraically
/// equivalent to bootstrap + markov_estimate at forgetting == 1; kept as an
/// independent reference path.
inline MarkovEstimate batch_markov_lq(std::span<const Sample> data,
                                      const EstimatorConfig& cfg) {
    cfg.validate();
    detail::require_enough_samples(data, cfg, "batch_markov_lq");
    detail::HankelStacks st = detail::build_stacks(data, cfg);

    const Index fu = st.future_inputs.rows();
    const Index pa = st.past_stack.rows();
    const Index fy = st.future_outputs.rows();
    Matrix stacked(fu + pa + fy, cfg.data_cols);
    stacked << st.future_inputs, st.past_stack, st.future_outputs;

    // The stacked matrix is rank deficient by construction whenever the
    // outputs are noise free, so the factorization runs unchecked and only
    // the future-input block is required to be full rank.
    const std::vector<Index> partition{fu, pa, fy};
    const LqFactors f = lq_factorize(stacked, partition, 0.0);
    const Matrix l11 = f.l.block(0, 0, fu, fu);
    const Matrix l21 = f.l.block(fu, 0, pa, fu);
    const Matrix l22 = f.l.block(fu, fu, pa, pa);
    const Matrix l31 = f.l.block(fu + pa, 0, fy, fu);
    const Matrix l32 = f.l.block(fu + pa, fu, fy, pa);

    const double cut = default_rank_tol(fu, cfg.data_cols) *
                       l11.diagonal().cwiseAbs().maxCoeff();
    for (Index k = 0; k < fu; ++k) {
        if (std::abs(l11(k, k)) <= cut) {
            const Index reached = k / cfg.num_inputs;
            throw ExcitationError(
                "batch_markov_lq: the input is not persistently exciting to order " +
                    std::to_string(cfg.future_horizon) + " (roughly order " +
                    std::to_string(reached) + " reached)",
                reached);
        }
    }

    const Matrix num = l31 - l32 * pinv(l22) * l21;
    // psi = num * l11^-1 via a triangular solve on the transpose
    Matrix psi = l11.transpose()
                     .triangularView<Eigen::Upper>()
                     .solve(num.transpose())
                     .transpose();
    if (!psi.allFinite())
        throw BreakdownError("batch_markov_lq: non-finite result");
    return MarkovEstimate(std::move(psi), cfg.num_inputs, cfg.num_outputs,
                          cfg.future_horizon);
}

}  // namespace delayest
