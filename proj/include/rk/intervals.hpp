#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rk/errors.hpp"
#include "rk/rng.hpp"

namespace rk {

enum class Tendency { increase, decrease, constant };

std::string to_string(Tendency t);

/// Class of a prediction from r = (y_prev_true - y_pred) / y_pred.
/// Increase when r >= threshold, Decrease when r <= -threshold.
///
/// Note the direction: the ratio compares the previous *observed* value with
/// the *current prediction*, so "Increase" means the prediction sits below
/// the last observation by at least the threshold. This is kept as the
/// defining formula reads, not as the label suggests.
Tendency classify_tendency(double y_prev_true, double y_pred, double threshold = 0.1);

/// Modified Bessel function of the second kind, order 1, for x > 0.
double bessel_k1(double x);
/// K1(x) * exp(x), finite for large x.
double bessel_k1_scaled(double x);

/// NIG in location-scale form: with y = (x - x0) / sigma,
///   f(x) = a K1(a sqrt(1+y^2)) exp(sqrt(a^2-b^2) + b y) / (pi sigma sqrt(1+y^2)).
struct NigParams {
    double a = 1.0;  // tail heaviness
    double b = 0.0;  // asymmetry, |b| <= a
    double x0 = 0.0; // location
    double sigma = 1.0;

    void validate() const;
    double mean() const;
    double variance() const;
};

double nig_log_pdf(double x, const NigParams& p);
double nig_pdf(double x, const NigParams& p);
/// Adaptive Gauss-Kronrod on the standardised density, tolerance 1e-12.
double nig_cdf(double x, const NigParams& p);
/// CDF bisection; `tol` is relative to sigma.
double nig_quantile(double prob, const NigParams& p, double tol = 1e-8);

/// Normal variance-mean mixture draw (inverse-Gaussian mixing variable).
std::vector<double> sample_nig(const NigParams& p, std::size_t n, Rng& rng);

struct GaussParams {
    double mean = 0.0;
    double sd = 1.0;
};

double gauss_log_pdf(double x, const GaussParams& g);
double gauss_cdf(double x, const GaussParams& g);
double gauss_quantile(double prob, const GaussParams& g, double tol = 1e-8);

struct NigFit {
    NigParams params;
    double log_likelihood = 0.0;
    std::size_t evaluations = 0;
};

struct GaussFit {
    GaussParams params;
    double log_likelihood = 0.0;
};

/// Thrown when the simplex search exhausts its budget; carries the best point.
class NigFitError : public ConvergenceError {
public:
    NigFitError(const std::string& what, const NigParams& best, double best_loglik)
        : ConvergenceError(what, best_loglik), best_(best) {}
    const NigParams& best_params() const { return best_; }

private:
    NigParams best_;
};

struct NigFitOptions {
    std::size_t max_evaluations = 4000; // per simplex run
    std::size_t restarts = 2;
};

/// Maximum likelihood over (log a, atanh(b/a), x0, log sigma) by Nelder-Mead
/// started from moment matching. Needs at least 8 samples.
NigFit fit_nig(std::span<const double> samples, const NigFitOptions& opt = {});

/// Sample mean and maximum-likelihood sd. Needs at least 2 samples.
GaussFit fit_gaussian(std::span<const double> samples);

/// k ln(n) - 2 loglik; n is real so that non-integer effective sizes work.
double model_bic(double log_likelihood, std::size_t param_count, double sample_count);

inline constexpr std::size_t kNigParamCount = 4;
inline constexpr std::size_t kGaussParamCount = 2;
inline constexpr std::size_t kMinClassSamples = 8;

enum class Family { nig, gaussian };

/// Family selection when building intervals: the BIC winner or a fixed one.
enum class FamilyChoice { bic, nig, gaussian };

struct ClassFit {
    NigFit nig;
    GaussFit gauss;
    double bic_nig = 0.0;
    double bic_gauss = 0.0;
    Family chosen = Family::nig;
    std::size_t samples = 0;
    bool pooled = false; // too few residuals, pooled fit used instead

    Family family(FamilyChoice c) const;
    double quantile(double prob, Family f) const;
};

ClassFit fit_class(std::span<const double> residuals);

/// Residuals are actual - prediction, so that L = y_pred + Q(alpha/2) and
/// U = y_pred + Q(1 - alpha/2) cover the actual value.
struct IntervalModel {
    double threshold = 0.1;
    std::array<ClassFit, 3> classes; // indexed by Tendency
    ClassFit pooled;

    const ClassFit& fit(Tendency t) const { return classes[static_cast<std::size_t>(t)]; }
};

/// Element t uses prev_true[t], pred[t] and actual[t]; all spans equal length.
IntervalModel fit_interval_model(std::span<const double> prev_true, std::span<const double> pred,
                                 std::span<const double> actual, double threshold = 0.1);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

Interval interval_bounds(double y_pred, const ClassFit& fit, double pinc, FamilyChoice choice = FamilyChoice::bic);

struct IntervalSet {
    std::vector<double> pinc;
    std::vector<Tendency> classes;
    std::vector<std::vector<Interval>> bounds; // [level][t]
};

IntervalSet predict_intervals(const IntervalModel& model, std::span<const double> prev_true,
                              std::span<const double> pred, const std::vector<double>& pinc_levels,
                              FamilyChoice choice = FamilyChoice::bic);

struct IntervalMetrics {
    double picp = 0.0;
    double ace = 0.0;
    double piaw = 0.0;
};

/// Coverage with inclusive bounds, ACE = PICP - PINC, PIAW = mean(U - L).
IntervalMetrics interval_metrics(std::span<const Interval> intervals, std::span<const double> actual, double pinc);

} // namespace rk
