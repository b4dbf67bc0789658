#include "rk/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "rk/optim.hpp"

namespace rk {

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

// Small-argument series for K1 (x <= 2), with I1 alongside.
double k1_series(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0; // (x^2/4)^k / (k! (k+1)!)
    double psi_a = -kEulerGamma;      // psi(k+1)
    double psi_b = 1.0 - kEulerGamma; // psi(k+2)
    double i1 = 0.0, s = 0.0;
    for (int k = 0; k < 60; ++k) {
        i1 += term;
        s += (psi_a + psi_b) * term;
        if (term < 1e-18 * i1) break;
        psi_a += 1.0 / (k + 1);
        psi_b += 1.0 / (k + 2);
        term *= q / ((k + 1.0) * (k + 2.0));
    }
    i1 *= 0.5 * x;
    return 1.0 / x + std::log(0.5 * x) * i1 - 0.25 * x * s;
}

// K1(x) e^x = int_0^inf exp(-x (cosh t - 1)) cosh t dt. The integrand is
// analytic and decays double-exponentially, so the trapezoid rule converges
// geometrically in 1/h.
double k1_scaled_trapezoid(double x) {
    const double h = std::min(0.25, 0.7 / std::sqrt(x));
    const double t_max = std::acosh(1.0 + 45.0 / x);
    double sum = 0.5;
    for (int j = 1;; ++j) {
        const double t = j * h;
        if (t > t_max) break;
        const double sh = std::sinh(0.5 * t); // cosh t - 1 = 2 sinh^2(t/2), no cancellation
        sum += std::exp(-2.0 * x * sh * sh) * std::cosh(t);
    }
    return h * sum;
}

void check_prob(double p, const char* who) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument(std::string(who) + ": probability must lie in (0, 1)");
}

// sqrt(a^2 - b^2) - a r + b y without cancellation for large a and |y|.
double std_exponent(double y, double r, double a, double b) {
    const double ay = std::abs(y);
    const double gap = y >= 0.0 ? a - b : a + b;
    return std::sqrt(std::max((a - b) * (a + b), 0.0)) - a / (r + ay) - gap * ay;
}

// Standardised NIG density g(y), so that pdf(x) = g((x - x0)/sigma)/sigma.
double std_log_density(double y, double a, double b) {
    const double r = std::sqrt(1.0 + y * y);
    return std::log(a) - std::log(std::numbers::pi) - std::log(r) + std::log(bessel_k1_scaled(a * r)) +
           std_exponent(y, r, a, b);
}

// Mode and a width scale of the standardised density. The density is
// unimodal with its mode on the side of b.
struct StdShape {
    double a, b, mode, width;
};

StdShape std_shape(double a, double b) {
    auto L = [a, b](double y) { return std_log_density(y, a, b); };
    double mode = 0.0;
    if (b != 0.0) {
        const double dir = b > 0.0 ? 1.0 : -1.0;
        double hi = 1.0;
        for (int i = 0; i < 1000 && !(L(dir * hi) < L(dir * 0.5 * hi)); ++i) hi *= 2.0;
        const auto r = boost::math::tools::brent_find_minima([&](double t) { return -L(dir * t); }, 0.0, hi, 40);
        mode = dir * r.first;
    }
    // distance at which the log density has dropped by one, on the steeper side
    const double top = L(mode);
    double width = std::numeric_limits<double>::infinity();
    for (double dir : {-1.0, 1.0}) {
        double d = 1e-8 * std::max(1.0, std::abs(mode));
        for (int i = 0; i < 2000 && L(mode + dir * d) > top - 1.0; ++i) d *= 2.0;
        width = std::min(width, d);
    }
    return {a, b, mode, width};
}

// int_y^inf g (dir = +1) or int_-inf^y g (dir = -1) for y on the far side of
// the mode, over segments of doubling width until one contributes nothing.
double std_tail(double y, const StdShape& s, int dir) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    auto g = [&s](double t) { return std::exp(std_log_density(t, s.a, s.b)); };
    double total = 0.0, lo = y, width = s.width;
    for (int seg = 0; seg < 400; ++seg) {
        const double hi = lo + dir * width;
        const double part = dir > 0 ? GK::integrate(g, lo, hi, 15, 1e-11) : GK::integrate(g, hi, lo, 15, 1e-11);
        total += part;
        if (part <= 1e-17 * total || part == 0.0) return total;
        lo = hi;
        width *= 2.0;
    }
    throw ConvergenceError("nig_cdf: tail integral did not settle", total);
}

double std_cdf(double y, const StdShape& s) {
    return y <= s.mode ? std_tail(y, s, -1) : 1.0 - std_tail(y, s, +1);
}

template <class Cdf>
double bisect_quantile(double prob, double centre, double scale, double tol, Cdf cdf, const char* who) {
    check_prob(prob, who);
    if (!(scale > 0.0) || !std::isfinite(centre)) throw std::invalid_argument(std::string(who) + ": bad scale");
    double lo = centre - scale, hi = centre + scale;
    double step = scale;
    for (int i = 0; cdf(lo) > prob; ++i) {
        if (i > 200) throw ConvergenceError(std::string(who) + ": lower bracket not found", lo);
        step *= 2.0;
        lo -= step;
    }
    step = scale;
    for (int i = 0; cdf(hi) < prob; ++i) {
        if (i > 200) throw ConvergenceError(std::string(who) + ": upper bracket not found", hi);
        step *= 2.0;
        hi += step;
    }
    const double eps = tol * scale;
    for (int i = 0; hi - lo > eps; ++i) {
        if (i > 400) throw ConvergenceError(std::string(who) + ": bisection did not converge", 0.5 * (lo + hi));
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (cdf(mid) < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Moments {
    double mean = 0.0, var = 0.0, skew = 0.0, exkurt = 0.0;
};

Moments sample_moments(std::span<const double> s) {
    const double n = static_cast<double>(s.size());
    Moments m;
    for (double v : s) m.mean += v;
    m.mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : s) {
        const double d = v - m.mean, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.var = m2;
    if (m2 > 0.0) {
        m.skew = m3 / std::pow(m2, 1.5);
        m.exkurt = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

// Method-of-moments NIG for standardised data (mean 0, variance 1).
NigParams moment_start(const Moments& m) {
    const double s = m.skew;
    const double floor_k = 1.01 * 5.0 * s * s / 3.0 + 0.1;
    const double k = std::max(m.exkurt, floor_k);
    const double zeta = 3.0 / (k - 4.0 * s * s / 3.0);
    const double rho = std::clamp(s * std::sqrt(zeta) / 3.0, -0.99, 0.99);
    const double gamma = std::sqrt(zeta / (1.0 - rho * rho));
    const double alpha = gamma / std::sqrt(1.0 - rho * rho);
    const double beta = rho * alpha;
    const double delta = zeta / gamma;
    NigParams p;
    p.a = alpha * delta;
    p.b = beta * delta;
    p.sigma = delta;
    p.x0 = -delta * beta / gamma;
    return p;
}

constexpr double kMaxAtanh = 15.0;

std::vector<double> to_theta(const NigParams& p) {
    return {std::log(p.a), std::atanh(std::clamp(p.b / p.a, -std::tanh(kMaxAtanh), std::tanh(kMaxAtanh))), p.x0,
            std::log(p.sigma)};
}

NigParams from_theta(const std::vector<double>& t) {
    NigParams p;
    p.a = std::exp(t[0]);
    p.b = p.a * std::tanh(std::clamp(t[1], -kMaxAtanh, kMaxAtanh));
    p.x0 = t[2];
    p.sigma = std::exp(t[3]);
    return p;
}

} // namespace

std::string to_string(Tendency t) {
    switch (t) {
    case Tendency::increase: return "increase";
    case Tendency::decrease: return "decrease";
    case Tendency::constant: return "constant";
    }
    return "constant";
}

Tendency classify_tendency(double y_prev_true, double y_pred, double threshold) {
    if (y_pred == 0.0) throw std::invalid_argument("classify_tendency: prediction is zero, ratio undefined");
    if (!std::isfinite(y_prev_true) || !std::isfinite(y_pred))
        throw std::invalid_argument("classify_tendency: non-finite input");
    if (!(threshold > 0.0)) throw std::invalid_argument("classify_tendency: threshold must be positive");
    const double r = (y_prev_true - y_pred) / y_pred;
    if (r >= threshold) return Tendency::increase;
    if (r <= -threshold) return Tendency::decrease;
    return Tendency::constant;
}

double bessel_k1_scaled(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("bessel_k1: argument must be positive");
    if (std::isinf(x)) return 0.0;
    if (x <= 2.0) return k1_series(x) * std::exp(x);
    return k1_scaled_trapezoid(x);
}

double bessel_k1(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("bessel_k1: argument must be positive");
    if (x <= 2.0) return k1_series(x);
    return k1_scaled_trapezoid(x) * std::exp(-x);
}

void NigParams::validate() const {
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("NigParams: a must be positive");
    if (!(std::abs(b) <= a)) throw std::invalid_argument("NigParams: |b| must not exceed a");
    if (!std::isfinite(x0)) throw std::invalid_argument("NigParams: x0 must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("NigParams: sigma must be positive");
}

double NigParams::mean() const {
    const double g = std::sqrt(a * a - b * b);
    if (g == 0.0) return b > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    return x0 + sigma * b / g;
}

double NigParams::variance() const {
    const double g2 = a * a - b * b;
    if (g2 == 0.0) return std::numeric_limits<double>::infinity();
    return sigma * sigma * a * a / std::pow(g2, 1.5);
}

double nig_log_pdf(double x, const NigParams& p) {
    p.validate();
    return std_log_density((x - p.x0) / p.sigma, p.a, p.b) - std::log(p.sigma);
}

double nig_pdf(double x, const NigParams& p) { return std::exp(nig_log_pdf(x, p)); }

double nig_cdf(double x, const NigParams& p) {
    p.validate();
    if (x == std::numeric_limits<double>::infinity()) return 1.0;
    if (x == -std::numeric_limits<double>::infinity()) return 0.0;
    return std::clamp(std_cdf((x - p.x0) / p.sigma, std_shape(p.a, p.b)), 0.0, 1.0);
}

double nig_quantile(double prob, const NigParams& p, double tol) {
    p.validate();
    const StdShape shape = std_shape(p.a, p.b);
    // tol stays relative to sigma; the bracket starts at the mode
    const double centre = p.x0 + p.sigma * shape.mode, scale = p.sigma * shape.width;
    return bisect_quantile(prob, centre, scale, tol * p.sigma / scale, [&](double x) {
        return std::clamp(std_cdf((x - p.x0) / p.sigma, shape), 0.0, 1.0);
    }, "nig_quantile");
}

std::vector<double> sample_nig(const NigParams& p, std::size_t n, Rng& rng) {
    p.validate();
    if (!(std::abs(p.b) < p.a)) throw std::invalid_argument("sample_nig: needs |b| < a");
    const double alpha = p.a / p.sigma, beta = p.b / p.sigma, delta = p.sigma;
    const double gamma = std::sqrt(alpha * alpha - beta * beta);
    const double mu = delta / gamma, lambda = delta * delta;
    std::vector<double> out(n);
    for (auto& v : out) {
        // inverse Gaussian by the transformation-with-rejection method
        const double nu = rng.normal();
        const double y = nu * nu;
        const double z = mu + mu * mu * y / (2.0 * lambda) -
                         (mu / (2.0 * lambda)) * std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
        const double ig = rng.uniform() <= mu / (mu + z) ? z : mu * mu / z;
        v = p.x0 + beta * ig + std::sqrt(ig) * rng.normal();
    }
    return out;
}

double gauss_log_pdf(double x, const GaussParams& g) {
    if (!(g.sd > 0.0)) throw std::invalid_argument("gauss_log_pdf: sd must be positive");
    const double z = (x - g.mean) / g.sd;
    return -0.5 * z * z - std::log(g.sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double gauss_cdf(double x, const GaussParams& g) {
    if (!(g.sd > 0.0)) throw std::invalid_argument("gauss_cdf: sd must be positive");
    return 0.5 * std::erfc(-(x - g.mean) / (g.sd * std::numbers::sqrt2));
}

double gauss_quantile(double prob, const GaussParams& g, double tol) {
    return bisect_quantile(prob, g.mean, g.sd, tol, [&](double x) { return gauss_cdf(x, g); }, "gauss_quantile");
}

NigFit fit_nig(std::span<const double> samples, const NigFitOptions& opt) {
    if (samples.size() < kMinClassSamples) throw std::invalid_argument("fit_nig: needs at least 8 samples");
    for (double v : samples)
        if (!std::isfinite(v)) throw std::invalid_argument("fit_nig: non-finite sample");
    const Moments m = sample_moments(samples);
    if (!(m.var > 0.0)) throw std::invalid_argument("fit_nig: samples have zero variance");

    // Fit on standardised data; a and b are scale free.
    const double sd = std::sqrt(m.var);
    std::vector<double> z(samples.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (samples[i] - m.mean) / sd;
    Moments mz = m;
    mz.mean = 0.0;
    mz.var = 1.0;

    auto nll = [&](const std::vector<double>& t) {
        const NigParams p = from_theta(t);
        if (!(p.a > 0.0) || !(p.sigma > 0.0) || !std::isfinite(p.a) || !std::isfinite(p.sigma))
            return std::numeric_limits<double>::infinity();
        const double la = std::log(p.a), ls = std::log(p.sigma);
        double s = 0.0;
        for (double v : z) {
            const double y = (v - p.x0) / p.sigma;
            const double r = std::sqrt(1.0 + y * y);
            s += la - std::log(r) + std::log(bessel_k1_scaled(p.a * r)) + std_exponent(y, r, p.a, p.b) - ls;
        }
        return -(s - static_cast<double>(z.size()) * std::log(std::numbers::pi));
    };

    NelderMeadOptions nm;
    nm.max_evaluations = opt.max_evaluations;
    nm.f_tol = 1e-11;
    nm.x_tol = 1e-7;
    nm.initial_step = 0.5;

    std::vector<double> theta = to_theta(moment_start(mz));
    NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::size_t evals = 0;
    for (std::size_t run = 0; run <= opt.restarts; ++run) {
        NelderMeadResult r = nelder_mead(nll, theta, nm);
        evals += r.evaluations;
        const bool settled = r.value >= best.value - 1e-9 * (1.0 + std::abs(best.value));
        if (r.value < best.value) best = r;
        theta = best.x;
        nm.initial_step = 0.1;
        if (run > 0 && settled && best.converged) break;
    }

    NigParams p = from_theta(best.x);
    p.x0 = m.mean + sd * p.x0;
    p.sigma *= sd;
    const double ll = -best.value - static_cast<double>(z.size()) * std::log(sd);
    if (!best.converged || !std::isfinite(ll))
        throw NigFitError("fit_nig: simplex search did not converge within budget", p, ll);
    return NigFit{p, ll, evals};
}

GaussFit fit_gaussian(std::span<const double> samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit_gaussian: needs at least 2 samples");
    const Moments m = sample_moments(samples);
    if (!(m.var > 0.0)) throw std::invalid_argument("fit_gaussian: samples have zero variance");
    GaussFit f;
    f.params = {m.mean, std::sqrt(m.var)};
    const double n = static_cast<double>(samples.size());
    f.log_likelihood = -0.5 * n * (std::log(2.0 * std::numbers::pi * m.var) + 1.0);
    return f;
}

double model_bic(double log_likelihood, std::size_t param_count, double sample_count) {
    if (!(sample_count >= 1.0)) throw std::invalid_argument("model_bic: needs at least one sample");
    return static_cast<double>(param_count) * std::log(sample_count) - 2.0 * log_likelihood;
}

Family ClassFit::family(FamilyChoice c) const {
    switch (c) {
    case FamilyChoice::nig: return Family::nig;
    case FamilyChoice::gaussian: return Family::gaussian;
    case FamilyChoice::bic: break;
    }
    return chosen;
}

double ClassFit::quantile(double prob, Family f) const {
    return f == Family::nig ? nig_quantile(prob, nig.params) : gauss_quantile(prob, gauss.params);
}

ClassFit fit_class(std::span<const double> residuals) {
    ClassFit c;
    c.samples = residuals.size();
    c.nig = fit_nig(residuals);
    c.gauss = fit_gaussian(residuals);
    c.bic_nig = model_bic(c.nig.log_likelihood, kNigParamCount, static_cast<double>(residuals.size()));
    c.bic_gauss = model_bic(c.gauss.log_likelihood, kGaussParamCount, static_cast<double>(residuals.size()));
    c.chosen = c.bic_nig <= c.bic_gauss ? Family::nig : Family::gaussian;
    return c;
}

IntervalModel fit_interval_model(std::span<const double> prev_true, std::span<const double> pred,
                                 std::span<const double> actual, double threshold) {
    if (prev_true.size() != pred.size() || pred.size() != actual.size())
        throw std::invalid_argument("fit_interval_model: length mismatch");
    IntervalModel model;
    model.threshold = threshold;
    std::array<std::vector<double>, 3> by_class;
    std::vector<double> all;
    all.reserve(pred.size());
    for (std::size_t t = 0; t < pred.size(); ++t) {
        const double r = actual[t] - pred[t];
        by_class[static_cast<std::size_t>(classify_tendency(prev_true[t], pred[t], threshold))].push_back(r);
        all.push_back(r);
    }
    if (all.size() < kMinClassSamples) throw std::invalid_argument("fit_interval_model: needs at least 8 residuals");
    model.pooled = fit_class(all);
    for (std::size_t k = 0; k < 3; ++k) {
        if (by_class[k].size() >= kMinClassSamples) {
            model.classes[k] = fit_class(by_class[k]);
        } else {
            model.classes[k] = model.pooled;
            model.classes[k].pooled = true;
            model.classes[k].samples = by_class[k].size();
        }
    }
    return model;
}

Interval interval_bounds(double y_pred, const ClassFit& fit, double pinc, FamilyChoice choice) {
    check_prob(pinc, "interval_bounds");
    const double alpha = 1.0 - pinc;
    const Family f = fit.family(choice);
    return {y_pred + fit.quantile(0.5 * alpha, f), y_pred + fit.quantile(1.0 - 0.5 * alpha, f)};
}

IntervalSet predict_intervals(const IntervalModel& model, std::span<const double> prev_true,
                              std::span<const double> pred, const std::vector<double>& pinc_levels,
                              FamilyChoice choice) {
    if (prev_true.size() != pred.size()) throw std::invalid_argument("predict_intervals: length mismatch");
    IntervalSet out;
    out.pinc = pinc_levels;
    out.classes.reserve(pred.size());
    for (std::size_t t = 0; t < pred.size(); ++t)
        out.classes.push_back(classify_tendency(prev_true[t], pred[t], model.threshold));

    for (double pinc : pinc_levels) {
        // offsets depend only on the class, so compute them once
        std::array<Interval, 3> offs;
        for (std::size_t k = 0; k < 3; ++k) offs[k] = interval_bounds(0.0, model.classes[k], pinc, choice);
        std::vector<Interval> level(pred.size());
        for (std::size_t t = 0; t < pred.size(); ++t) {
            const Interval& o = offs[static_cast<std::size_t>(out.classes[t])];
            level[t] = {pred[t] + o.lower, pred[t] + o.upper};
        }
        out.bounds.push_back(std::move(level));
    }
    return out;
}

IntervalMetrics interval_metrics(std::span<const Interval> intervals, std::span<const double> actual, double pinc) {
    if (intervals.empty()) throw std::invalid_argument("interval_metrics: empty input");
    if (intervals.size() != actual.size()) throw std::invalid_argument("interval_metrics: length mismatch");
    std::size_t hits = 0;
    double width = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        if (actual[t] >= intervals[t].lower && actual[t] <= intervals[t].upper) ++hits;
        width += intervals[t].upper - intervals[t].lower;
    }
    IntervalMetrics m;
    const double n = static_cast<double>(actual.size());
    m.picp = static_cast<double>(hits) / n;
    m.ace = m.picp - pinc;
    m.piaw = width / n;
    return m;
}

} // namespace rk
