#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rk/esn.hpp"

namespace rk {

struct LagCorrelation {
    int max_lag = 0;
    std::vector<double> values; // index h + max_lag for h in [-max_lag, max_lag]
    std::size_t n = 0;          // series length

    double at(int h) const { return values.at(static_cast<std::size_t>(h + max_lag)); }
};

/// CCF(h) = corr(x[t+h], y[t]) over the overlapping indices, with global means
/// and per-lag truncated sums in both numerator and denominator. Negative h
/// pairs past values of x with the present of y.
LagCorrelation ccf(std::span<const double> x, std::span<const double> y, int max_lag);

struct ArModel {
    std::size_t order = 0;
    double mean = 0.0;
    std::vector<double> phi;      // phi[i] multiplies x[t-1-i] (demeaned)
    std::vector<double> residuals; // length n - order
    double sigma2 = 0.0;
    double bic = 0.0;
};

/// Least-squares AR(p) on the demeaned series, p in 0..max_order chosen by
/// BIC on a common sample (t >= max_order), then refitted on all usable rows.
ArModel ar_fit(std::span<const double> x, std::size_t max_order);

/// Applies the AR filter (mean and coefficients of `model`) to any series.
std::vector<double> ar_filter(const ArModel& model, std::span<const double> series);

struct Prewhitened {
    ArModel model;               // fitted to x
    std::vector<double> x_resid;
    std::vector<double> y_filtered;
};

/// Fits an AR model to x and filters both x and y with it. y is centred on
/// its own mean before filtering.
Prewhitened prewhiten(std::span<const double> x, std::span<const double> y, std::size_t max_order = 8);

inline constexpr double kZ95 = 1.959963984540054;

/// Lags with |CCF(h)| > z / sqrt(n).
std::vector<int> significant_lags(const LagCorrelation& c, double z = kZ95);

struct CcfEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    std::vector<int> lags; // positive: src[t - lag] relates to dst[t]
};

struct CcfNetwork {
    std::vector<std::string> nodes;
    std::vector<CcfEdge> edges;
    /// Ordered pairs (src, dst) whose lag-0 correlation was significant; kept
    /// for reporting only since src[t] is not known when predicting dst[t].
    std::vector<std::pair<std::size_t, std::size_t>> contemporaneous;
};

CcfNetwork build_network(const std::vector<std::string>& names, const std::vector<std::vector<double>>& series,
                         int max_lag, double z = kZ95, std::size_t ar_order = 8);

/// {"nodes":[...],"edges":[{"src":..,"dst":..,"lags":[..]}]}
std::string network_to_json(const CcfNetwork& net);

/// Copy of `series` shifted so that element t holds series[t - lag]; the
/// first `lag` entries repeat series[0].
std::vector<double> delayed(std::span<const double> series, std::size_t lag);

struct Candidate {
    std::string name;
    std::vector<double> values; // aligned with the target
};

/// Scores a subset (indices into the candidate list); lower is better.
using SubsetEvaluator = std::function<double(const std::vector<std::size_t>& subset)>;

enum class SubsetSearch { exhaustive, greedy };

inline constexpr std::size_t kMaxExhaustiveCandidates = 12;

struct SubsetResult {
    std::vector<std::size_t> subset; // sorted
    double score = 0.0;
    double baseline = 0.0; // empty subset
    std::size_t evaluated = 0;
};

/// Exhaustive search over all 2^c subsets (c <= 12). Ties go to the smaller
/// subset, then to the lexicographically smaller index list. Greedy forward
/// selection adds the best candidate while the score strictly improves.
SubsetResult select_subset(std::size_t candidate_count, const SubsetEvaluator& eval,
                           SubsetSearch mode = SubsetSearch::exhaustive);

/// Evaluator that trains an ensemble on target[0, train_len) with the chosen
/// candidates as inputs and returns the one-step MAE on the rest.
SubsetEvaluator esn_subset_evaluator(const EsnConfig& base, std::size_t members, std::span<const double> target,
                                     const std::vector<Candidate>& candidates, std::size_t train_len);

} // namespace rk
