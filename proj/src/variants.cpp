#include "rk/variants.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/QR>

#include "rk/errors.hpp"
#include "rk/rng.hpp"

namespace rk {

// ---------------------------------------------------------------- ensemble

std::uint64_t member_seed(std::uint64_t run_seed, std::size_t i) {
    return Rng::split(run_seed, 0x100 + static_cast<std::uint64_t>(i));
}

EnsembleModel ensemble_train(const EsnConfig& config, std::size_t n_members, const Mat<double>& inputs,
                             const Mat<double>& targets) {
    if (n_members < 1) throw std::invalid_argument("ensemble_train: need at least one member");
    config.validate();
    EnsembleModel model;
    model.shared_config = config;
    model.last_target = targets.row(targets.rows() - 1).transpose();
    model.fitted = Mat<double>::Zero(targets.rows(), targets.cols());

    for (std::size_t i = 0; i < n_members; ++i) {
        EsnConfig c = config;
        c.seed = member_seed(config.seed, i);
        try {
            EnsembleMember m;
            m.seed = c.seed;
            m.matrices = build_reservoir(c);
            const auto traj = teacher_force<double>(m.matrices, c, inputs, targets);
            m.readout = fit_readout(traj, c.regularization, c.feature_kind(), c.output_activation);
            m.last_state = traj.states.row(traj.states.rows() - 1).transpose();
            for (Eigen::Index t = 0; t < traj.states.rows(); ++t)
                model.fitted.row(t) += m.readout.apply(traj.states.row(t).transpose()).transpose();
            model.members.push_back(std::move(m));
        } catch (const NumericalError& e) {
            model.dropped.push_back(i);
            model.warnings.push_back("member " + std::to_string(i) + " dropped: " + e.what());
        }
    }
    if (2 * model.members.size() < n_members)
        throw NumericalError("ensemble_train: " + std::to_string(model.dropped.size()) + " of " +
                             std::to_string(n_members) + " members diverged");
    model.fitted /= static_cast<double>(model.members.size());
    return model;
}

Mat<double> member_forecast(const EnsembleModel& model, std::size_t i, const Mat<double>* inputs_future,
                            std::size_t horizon) {
    const auto& m = model.members.at(i);
    EsnConfig c = model.shared_config;
    c.seed = m.seed;
    return free_run<double>(m.matrices, c, m.readout, m.last_state, model.last_target, inputs_future, horizon)
        .predictions;
}

Mat<double> ensemble_forecast(const EnsembleModel& model, const Mat<double>* inputs_future, std::size_t horizon) {
    Mat<double> sum = Mat<double>::Zero(static_cast<Eigen::Index>(horizon), model.last_target.size());
    for (std::size_t i = 0; i < model.size(); ++i) sum += member_forecast(model, i, inputs_future, horizon);
    return sum / static_cast<double>(model.size());
}

Mat<double> ensemble_one_step(const EnsembleModel& model, const Mat<double>& inputs_future,
                              const Mat<double>& targets_future) {
    const Eigen::Index H = targets_future.rows();
    if (inputs_future.rows() != H) throw std::invalid_argument("ensemble_one_step: length mismatch");
    Mat<double> sum = Mat<double>::Zero(H, targets_future.cols());
    const EsnConfig& c = model.shared_config;
    for (const auto& m : model.members) {
        Vec<double> x = m.last_state, y = model.last_target;
        for (Eigen::Index t = 0; t < H; ++t) {
            x = step_state<double>(m.matrices, x, inputs_future.row(t).transpose(), y, c.leaking_rate, c.field);
            sum.row(t) += m.readout.apply(x).transpose();
            y = targets_future.row(t).transpose();
        }
    }
    return sum / static_cast<double>(model.size());
}

// ---------------------------------------------------------- decomposition

Decomposition decompose_additive(std::span<const double> y, std::size_t P) {
    if (P < 2) throw std::invalid_argument("decompose_additive: period must be >= 2");
    const std::size_t n = y.size();
    if (n < 2 * P) throw std::invalid_argument("decompose_additive: series shorter than two periods");

    Decomposition d;
    d.period = P;
    d.trend.assign(n, 0.0);
    const std::size_t h = P / 2;
    const bool even = P % 2 == 0;
    const std::size_t lo = h, hi = n - 1 - h; // defined range, inclusive
    for (std::size_t t = lo; t <= hi; ++t) {
        double s = 0.0;
        if (even) {
            s = 0.5 * (y[t - h] + y[t + h]);
            for (std::size_t j = t - h + 1; j < t + h; ++j) s += y[j];
        } else {
            for (std::size_t j = t - h; j <= t + h; ++j) s += y[j];
        }
        d.trend[t] = s / static_cast<double>(P);
    }

    std::vector<double> sum(P, 0.0);
    std::vector<std::size_t> cnt(P, 0);
    for (std::size_t t = lo; t <= hi; ++t) {
        sum[t % P] += y[t] - d.trend[t];
        ++cnt[t % P];
    }
    for (std::size_t t = 0; t < lo; ++t) d.trend[t] = d.trend[lo];
    for (std::size_t t = hi + 1; t < n; ++t) d.trend[t] = d.trend[hi];

    d.seasonal_pattern.resize(P);
    double mean = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        d.seasonal_pattern[p] = sum[p] / static_cast<double>(cnt[p]);
        mean += d.seasonal_pattern[p];
    }
    mean /= static_cast<double>(P);
    for (auto& v : d.seasonal_pattern) v -= mean;

    d.seasonal.resize(n);
    d.residual.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        d.seasonal[t] = d.seasonal_pattern[t % P];
        d.residual[t] = y[t] - d.trend[t] - d.seasonal[t];
    }
    return d;
}

AdfResult adf_statistic(std::span<const double> y, std::size_t p) {
    const std::size_t n = y.size();
    if (n <= p + 2) throw std::invalid_argument("adf_statistic: series too short for the lag order");
    const std::size_t rows = n - 1 - p;
    const std::size_t cols = p + 2;
    if (rows <= cols) throw std::invalid_argument("adf_statistic: too few observations for the regression");

    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd dy(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + p + 1;
        dy[r] = y[t] - y[t - 1];
        X(r, 0) = y[t - 1];
        for (std::size_t j = 1; j <= p; ++j) X(r, j) = y[t - j] - y[t - j - 1];
        X(r, cols - 1) = 1.0;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < static_cast<Eigen::Index>(cols))
        throw NumericalError("adf_statistic: rank-deficient regressor matrix");
    const Eigen::VectorXd beta = qr.solve(dy);
    const Eigen::VectorXd res = dy - X * beta;
    const double s2 = res.squaredNorm() / static_cast<double>(rows - cols);
    const Eigen::MatrixXd XtX = X.transpose() * X;
    const double var0 = XtX.ldlt().solve(Eigen::VectorXd::Unit(cols, 0))[0] * s2;
    AdfResult out;
    out.observations = rows;
    out.t_statistic = beta[0] / std::sqrt(var0);
    out.reject_unit_root = out.t_statistic < kAdfCritical5;
    return out;
}

namespace {

Mat<double> component_inputs(EsnConfig& c, const Mat<double>& regressors) {
    if (regressors.cols() > 0) {
        c.input_dim = static_cast<std::size_t>(regressors.cols());
        return regressors;
    }
    if (!c.constant_input) c.input_dim = 0;
    return constant_inputs<double>(c, static_cast<std::size_t>(regressors.rows()));
}

Mat<double> as_column(std::span<const double> v) {
    Mat<double> m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
    return m;
}

Mat<double> future_inputs(const EnsembleModel& model, const Mat<double>* regressors_future, std::size_t horizon) {
    const EsnConfig& c = model.shared_config;
    if (regressors_future && regressors_future->cols() > 0) return *regressors_future;
    if (c.input_dim > 0 && !c.constant_input) throw std::invalid_argument("drc_predict: future regressors required");
    return constant_inputs<double>(c, horizon);
}

} // namespace

std::vector<double> DecompositionModel::fitted() const {
    std::vector<double> out(train_length);
    for (std::size_t t = 0; t < train_length; ++t) {
        const auto i = static_cast<Eigen::Index>(t);
        const double s = seasonal_model ? seasonal_model->fitted(i, 0) : parts.seasonal[t];
        out[t] = trend_model.fitted(i, 0) + s + residual_model.fitted(i, 0);
    }
    return out;
}

DecompositionModel drc_train(std::span<const double> series, const Mat<double>& regressors, const DrcConfig& config) {
    const auto n = static_cast<Eigen::Index>(series.size());
    if (regressors.rows() != n && !(regressors.rows() == 0 && regressors.cols() == 0))
        throw std::invalid_argument("drc_train: regressors must have one row per observation");
    const Mat<double> regs = regressors.rows() == n ? regressors : Mat<double>(n, 0);

    DecompositionModel model;
    model.period = config.period;
    model.train_length = series.size();
    model.parts = decompose_additive(series, config.period);
    try {
        model.residual_adf = adf_statistic(model.parts.residual, std::min<std::size_t>(4, series.size() / 10));
    } catch (const NumericalError&) {
        // an exactly zero residual has no regression to run; it is trivially stationary
        model.residual_adf.reject_unit_root = true;
    }

    auto fit = [&](EsnConfig c, std::size_t members, const std::vector<double>& target) {
        c.output_dim = 1;
        const Mat<double> u = component_inputs(c, regs);
        return ensemble_train(c, members, u, as_column(target));
    };
    model.trend_model = fit(config.trend, config.trend_members, model.parts.trend);
    if (!config.seasonal_phase_lookup) model.seasonal_model = fit(config.seasonal, config.seasonal_members, model.parts.seasonal);
    model.residual_model = fit(config.residual, config.residual_members, model.parts.residual);
    return model;
}

std::vector<double> drc_predict(const DecompositionModel& model, const Mat<double>* regressors_future,
                                std::size_t horizon) {
    std::vector<double> out(horizon, 0.0);
    auto add = [&](const EnsembleModel& m) {
        const Mat<double> u = future_inputs(m, regressors_future, horizon);
        const Mat<double> f = ensemble_forecast(m, &u, horizon);
        for (std::size_t h = 0; h < horizon; ++h) out[h] += f(static_cast<Eigen::Index>(h), 0);
    };
    add(model.trend_model);
    add(model.residual_model);
    if (model.seasonal_model) {
        add(*model.seasonal_model);
    } else {
        for (std::size_t h = 0; h < horizon; ++h)
            out[h] += model.parts.seasonal_pattern[(model.train_length + h) % model.period];
    }
    return out;
}

// ------------------------------------------------------------------ NG-RC

std::size_t ngrc_feature_count(std::size_t k) { return 1 + (k + 1) + (k + 1) * (k + 2) / 2; }

Vec<double> ngrc_feature_vector(std::span<const double> s, std::size_t t, std::size_t k) {
    if (k < 1) throw std::invalid_argument("ngrc: delay depth must be >= 1");
    if (t < k || t >= s.size()) throw std::invalid_argument("ngrc: insufficient history");
    Vec<double> f(static_cast<Eigen::Index>(ngrc_feature_count(k)));
    Eigen::Index c = 0;
    f[c++] = 1.0;
    for (std::size_t i = 0; i <= k; ++i) f[c++] = s[t - i];
    for (std::size_t i = 0; i <= k; ++i)
        for (std::size_t j = i; j <= k; ++j) f[c++] = s[t - i] * s[t - j];
    return f;
}

Mat<double> ngrc_features(std::span<const double> s, std::size_t k) {
    if (s.size() <= k) throw std::invalid_argument("ngrc: insufficient history");
    Mat<double> rows(static_cast<Eigen::Index>(s.size() - k), static_cast<Eigen::Index>(ngrc_feature_count(k)));
    for (std::size_t t = k; t < s.size(); ++t) rows.row(static_cast<Eigen::Index>(t - k)) = ngrc_feature_vector(s, t, k).transpose();
    return rows;
}

NgrcModel ngrc_train(std::span<const double> s, const NgrcConfig& config) {
    const std::size_t k = config.delay_depth;
    if (k < 1) throw std::invalid_argument("ngrc: delay depth must be >= 1");
    if (s.size() < k + 2) throw std::invalid_argument("ngrc: insufficient history");
    const Mat<double> all = ngrc_features(s, k);
    const Mat<double> phi = all.topRows(all.rows() - 1);
    Mat<double> y(phi.rows(), 1);
    for (Eigen::Index r = 0; r < phi.rows(); ++r) y(r, 0) = s[static_cast<std::size_t>(r) + k + 1];
    RidgeAccumulator<double> acc(static_cast<std::size_t>(phi.cols()), 1);
    acc.add(phi, y);
    NgrcModel m;
    m.config = config;
    m.weights = acc.solve(config.regularization).row(0).transpose();
    m.tail.assign(s.end() - static_cast<std::ptrdiff_t>(k + 1), s.end());
    return m;
}

std::vector<double> ngrc_one_step(const NgrcModel& model, std::span<const double> s, std::size_t from) {
    const std::size_t k = model.config.delay_depth;
    if (from < k + 1) throw std::invalid_argument("ngrc_one_step: insufficient history");
    std::vector<double> out;
    for (std::size_t t = from; t < s.size(); ++t) out.push_back(model.weights.dot(ngrc_feature_vector(s, t - 1, k)));
    return out;
}

std::vector<double> ngrc_forecast(const NgrcModel& model, std::size_t horizon) {
    const std::size_t k = model.config.delay_depth;
    std::vector<double> hist = model.tail;
    std::vector<double> out;
    for (std::size_t h = 0; h < horizon; ++h) {
        const double v = model.weights.dot(ngrc_feature_vector(hist, hist.size() - 1, k));
        if (!std::isfinite(v)) throw DivergenceError("ngrc_forecast: non-finite prediction", h);
        out.push_back(v);
        hist.push_back(v);
    }
    return out;
}

// ------------------------------------------------------------- multi-step

template <class T>
MultiStepResult<T> multi_step_train(const ReservoirMatrices& matrices, const Mat<T>& inputs, const Mat<T>& targets,
                                    const MultiStepConfig& config, const Vec<T>& y_init) {
    const EsnConfig& c = config.base;
    if (!(config.split_fraction > 0.0 && config.split_fraction < 1.0))
        throw std::invalid_argument("multi_step_train: split_fraction must lie in (0, 1)");
    const Eigen::Index T_len = targets.rows();
    const auto t1 = static_cast<Eigen::Index>(std::floor(config.split_fraction * static_cast<double>(T_len)));
    if (t1 <= static_cast<Eigen::Index>(c.transient) || t1 >= T_len)
        throw std::invalid_argument("multi_step_train: split leaves an empty segment");

    MultiStepResult<T> r;
    r.matrices = matrices;
    r.split_index = static_cast<std::size_t>(t1);

    // phase A
    const Mat<T> inA = inputs.topRows(t1), yA = targets.topRows(t1);
    const auto trajA = teacher_force<T>(matrices, c, inA, yA, Vec<T>{}, y_init);
    const FeatureKind kind = c.feature_kind();
    const Mat<T> phiA = feature_rows(trajA.states, c.transient, kind);
    RidgeAccumulator<T> acc(static_cast<std::size_t>(phiA.cols()), static_cast<std::size_t>(targets.cols()));
    acc.add(phiA, readout_targets<T>(yA.bottomRows(phiA.rows()), c.output_activation));
    r.phase_a_readout.W_out = acc.solve(c.regularization);
    r.phase_a_readout.gamma_used = c.regularization;
    r.phase_a_readout.feature_kind = kind;
    r.phase_a_readout.activation = c.output_activation;

    // phase B: segment-2 targets are never read here
    const Eigen::Index len2 = T_len - t1;
    const Mat<T> inB = inputs.bottomRows(len2);
    auto fr = free_run<T>(matrices, c, r.phase_a_readout, trajA.states.row(t1 - 1).transpose(),
                          yA.row(t1 - 1).transpose(), &inB, static_cast<std::size_t>(len2), true);
    r.phase_b_states = std::move(fr.states);
    r.phase_b_predictions = std::move(fr.predictions);

    // phase C
    acc.add(feature_rows(r.phase_b_states, 0, kind),
            readout_targets<T>(Mat<T>(targets.bottomRows(len2)), c.output_activation));
    r.readout = r.phase_a_readout;
    r.readout.W_out = acc.solve(c.regularization);
    return r;
}

template <class T>
MultiStepResult<T> multi_step_train(const Mat<T>& inputs, const Mat<T>& targets, const MultiStepConfig& config,
                                    const Vec<T>& y_init) {
    return multi_step_train<T>(build_reservoir(config.base), inputs, targets, config, y_init);
}

template MultiStepResult<double> multi_step_train<double>(const ReservoirMatrices&, const Mat<double>&,
                                                          const Mat<double>&, const MultiStepConfig&,
                                                          const Vec<double>&);
template MultiStepResult<cplx> multi_step_train<cplx>(const ReservoirMatrices&, const Mat<cplx>&, const Mat<cplx>&,
                                                      const MultiStepConfig&, const Vec<cplx>&);
template MultiStepResult<double> multi_step_train<double>(const Mat<double>&, const Mat<double>&,
                                                          const MultiStepConfig&, const Vec<double>&);
template MultiStepResult<cplx> multi_step_train<cplx>(const Mat<cplx>&, const Mat<cplx>&, const MultiStepConfig&,
                                                      const Vec<cplx>&);

} // namespace rk
