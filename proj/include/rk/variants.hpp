#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rk/esn.hpp"

namespace rk {

// ---------------------------------------------------------------- ensemble

struct EnsembleMember {
    std::uint64_t seed = 0;
    ReservoirMatrices matrices;
    LinearReadout<double> readout;
    Vec<double> last_state; // state after the final training step
};

struct EnsembleModel {
    EsnConfig shared_config;
    std::vector<EnsembleMember> members;
    std::vector<std::size_t> dropped; // member indices removed after diverging
    std::vector<std::string> warnings;
    Vec<double> last_target;          // y_teach at the final training step
    Mat<double> fitted;               // mean in-sample teacher-forced outputs, T x L

    std::size_t size() const { return members.size(); }
};

/// Seed of ensemble member i for a run seed.
std::uint64_t member_seed(std::uint64_t run_seed, std::size_t i);

EnsembleModel ensemble_train(const EsnConfig& config, std::size_t n_members, const Mat<double>& inputs,
                             const Mat<double>& targets);

/// Free run of one member from the end of training.
Mat<double> member_forecast(const EnsembleModel& model, std::size_t i, const Mat<double>* inputs_future,
                            std::size_t horizon);

/// Mean of the member free runs.
Mat<double> ensemble_forecast(const EnsembleModel& model, const Mat<double>* inputs_future, std::size_t horizon);

/// One-step-ahead predictions: the reservoir keeps being driven by the true
/// previous target, so step t sees y_true(t-1).
Mat<double> ensemble_one_step(const EnsembleModel& model, const Mat<double>& inputs_future,
                              const Mat<double>& targets_future);

// ---------------------------------------------------------- decomposition

struct Decomposition {
    std::size_t period = 0;
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> residual;
    std::vector<double> seasonal_pattern; // one value per phase, phase of index 0 first
};

/// Classical additive decomposition with a centred moving average (2xP for
/// even P). Undefined trend values at the edges take the nearest defined one.
Decomposition decompose_additive(std::span<const double> series, std::size_t period);

struct AdfResult {
    double t_statistic = 0.0;
    bool reject_unit_root = false;
    std::size_t observations = 0;
};

/// Augmented Dickey-Fuller regression with intercept and a fixed lag count,
/// compared with the large-sample 5% critical value -2.86.
AdfResult adf_statistic(std::span<const double> series, std::size_t max_lag);

inline constexpr double kAdfCritical5 = -2.86;

struct DrcConfig {
    std::size_t period = 52;
    EsnConfig trend;
    EsnConfig seasonal;
    EsnConfig residual;
    std::size_t trend_members = 1;
    std::size_t seasonal_members = 1;
    std::size_t residual_members = 1;
    bool seasonal_phase_lookup = true;
};

struct DecompositionModel {
    std::size_t period = 0;
    std::size_t train_length = 0;
    Decomposition parts;
    EnsembleModel trend_model;
    std::optional<EnsembleModel> seasonal_model; // absent under phase lookup
    EnsembleModel residual_model;
    AdfResult residual_adf;

    /// In-sample fit: sum of the component fits over the training span.
    std::vector<double> fitted() const;
};

/// Regressors are T x K (K may be 0); every component receives all of them.
DecompositionModel drc_train(std::span<const double> series, const Mat<double>& regressors, const DrcConfig& config);

/// Forecast of the `horizon` steps after the training span.
std::vector<double> drc_predict(const DecompositionModel& model, const Mat<double>* regressors_future,
                                std::size_t horizon);

// ------------------------------------------------------------------ NG-RC

struct NgrcConfig {
    std::size_t delay_depth = 3; // k
    double regularization = 0.56;
};

std::size_t ngrc_feature_count(std::size_t k);

/// Feature vector at time t: 1, y(t)..y(t-k), then y(t-i)y(t-j) for i <= j.
Vec<double> ngrc_feature_vector(std::span<const double> series, std::size_t t, std::size_t k);

/// Rows for t = k .. n-1.
Mat<double> ngrc_features(std::span<const double> series, std::size_t k);

struct NgrcModel {
    NgrcConfig config;
    Vec<double> weights;
    std::vector<double> tail; // last k+1 training values
};

/// Fits y(t+1) from the features at t over the training series.
NgrcModel ngrc_train(std::span<const double> series, const NgrcConfig& config);

/// Prediction of series[t] from series[t-1-k .. t-1] for t in [from, n).
std::vector<double> ngrc_one_step(const NgrcModel& model, std::span<const double> series, std::size_t from);

/// Autonomous continuation after the training series.
std::vector<double> ngrc_forecast(const NgrcModel& model, std::size_t horizon);

// ------------------------------------------------------------- multi-step

struct MultiStepConfig {
    double split_fraction = 0.85;
    EsnConfig base;
};

template <class T>
struct MultiStepResult {
    ReservoirMatrices matrices;
    LinearReadout<T> readout;         // phase C
    LinearReadout<T> phase_a_readout;
    Mat<T> phase_b_states;
    Mat<T> phase_b_predictions;
    std::size_t split_index = 0;      // first row of segment 2
};

/// Splits the training span at split_fraction. Phase A teacher-forces
/// segment 1 and fits; phase B free-runs segment 2 from the end of segment 1
/// using only its own predictions; phase C refits on the post-transient states
/// of segment 1 together with the phase-B states against the true targets.
template <class T>
MultiStepResult<T> multi_step_train(const ReservoirMatrices& matrices, const Mat<T>& inputs, const Mat<T>& targets,
                                    const MultiStepConfig& config, const Vec<T>& y_init = {});

template <class T>
MultiStepResult<T> multi_step_train(const Mat<T>& inputs, const Mat<T>& targets, const MultiStepConfig& config,
                                    const Vec<T>& y_init = {});

} // namespace rk
