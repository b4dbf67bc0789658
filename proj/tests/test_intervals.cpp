#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "rk/intervals.hpp"
#include "rk/optim.hpp"

using namespace rk;

namespace {

const std::vector<NigParams> kPublished = {
    {0.12, -0.048, 0.0069, 0.051}, {1.36, 0.22, -0.083, 0.20}, {1.66, -0.25, 0.056, 0.18},
    {0.31, -0.025, -0.0097, 0.084}, {2.68, 1.05, -0.11, 0.257}, {0.77, -0.14, 0.037, 0.11},
    {0.699, 0.074, 0.0013, 0.094}, {0.508, 0.192, -0.077, 0.093}, {1.174, 0.229, 0.0022, 0.11},
};

double total_mass(const NigParams& p) {
    boost::math::quadrature::exp_sinh<double> es;
    auto right = [&](double x) { return nig_pdf(x, p); };
    auto left = [&](double u) { return nig_pdf(2.0 * p.x0 - u, p); };
    return es.integrate(right, p.x0, std::numeric_limits<double>::infinity()) +
           es.integrate(left, p.x0, std::numeric_limits<double>::infinity());
}

std::vector<double> skewed_mixture(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        if (rng.uniform() < 0.8)
            x = 0.1 * rng.normal();
        else
            x = -0.4 * std::log(1.0 - rng.uniform()); // exponential, mean 0.4
        x = -x;                                        // flip: heavy left tail
    }
    return v;
}

} // namespace

TEST(Tendency, EqualValuesAreConstant) { EXPECT_EQ(classify_tendency(2.0, 2.0), Tendency::constant); }

TEST(Tendency, BoundaryIsInclusive) {
    // (1.1 - 1.0)/1.0 is 0.10000000000000009 in binary, so use exact values too
    EXPECT_EQ(classify_tendency(1.1, 1.0, 0.1), Tendency::increase);
    EXPECT_EQ(classify_tendency(1.25, 1.0, 0.25), Tendency::increase);
    EXPECT_EQ(classify_tendency(0.75, 1.0, 0.25), Tendency::decrease);
}

TEST(Tendency, Decrease) { EXPECT_EQ(classify_tendency(0.85, 1.0, 0.1), Tendency::decrease); }

TEST(Tendency, ZeroPredictionThrows) { EXPECT_THROW(classify_tendency(1.0, 0.0), std::invalid_argument); }

TEST(Tendency, EveryPairGetsOneClass) {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const double prev = rng.uniform(-5, 5), pred = rng.uniform(-5, 5);
        const Tendency t = classify_tendency(prev, pred);
        const double r = (prev - pred) / pred;
        const int hits = (r >= 0.1) + (r <= -0.1) + (r > -0.1 && r < 0.1);
        ASSERT_EQ(hits, 1);
        if (r >= 0.1) EXPECT_EQ(t, Tendency::increase);
        if (r <= -0.1) EXPECT_EQ(t, Tendency::decrease);
    }
}

TEST(BesselK1, MatchesBoostAcrossRange) {
    for (double x = 1e-6; x < 700.0; x *= 1.07) {
        const double ref = boost::math::cyl_bessel_k(1, x);
        EXPECT_NEAR(bessel_k1(x) / ref, 1.0, 1e-12) << "x=" << x;
        EXPECT_NEAR(bessel_k1_scaled(x) / (ref * std::exp(x)), 1.0, 1e-12) << "x=" << x;
    }
    for (double x : {1.999999, 2.0, 2.000001})
        EXPECT_NEAR(bessel_k1(x) / boost::math::cyl_bessel_k(1, x), 1.0, 1e-12);
}

TEST(BesselK1, ScaledMatchesAsymptoticSeriesForLargeArgument) {
    for (double x : {5e3, 1e4, 1e5, 1e6, 1e8, 1e10, 1e12}) {
        const double mu = 4.0, e = 8.0 * x;
        const double series = 1.0 + (mu - 1) / e + (mu - 1) * (mu - 9) / (2 * e * e) +
                              (mu - 1) * (mu - 9) * (mu - 25) / (6 * e * e * e);
        const double ref = series * std::sqrt(M_PI / (2.0 * x));
        EXPECT_NEAR(bessel_k1_scaled(x) / ref, 1.0, 1e-12) << "x=" << x;
    }
}

TEST(BesselK1, NonPositiveThrows) {
    EXPECT_THROW(bessel_k1(0.0), std::invalid_argument);
    EXPECT_THROW(bessel_k1_scaled(-1.0), std::invalid_argument);
}

TEST(NigParams, InvariantsChecked) {
    EXPECT_THROW((NigParams{0.0, 0.0, 0.0, 1.0}.validate()), std::invalid_argument);
    EXPECT_THROW((NigParams{1.0, 1.5, 0.0, 1.0}.validate()), std::invalid_argument);
    EXPECT_THROW((NigParams{1.0, 0.0, 0.0, -1.0}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((NigParams{1.0, -1.0, 0.0, 1.0}.validate()));
    EXPECT_THROW(nig_pdf(0.0, NigParams{1.0, 2.0, 0.0, 1.0}), std::invalid_argument);
}

// Reference values from 25-digit evaluation with arbitrary-precision Bessel
// functions and quadrature.
TEST(NigPdf, MatchesHighPrecisionReference) {
    const NigParams p{0.12, -0.048, 0.0069, 0.051};
    const double xs[] = {-0.3, -0.05, 0.0, 0.01, 0.2, 1.0};
    const double pdf[] = {0.18005281395728186, 3.1503419481400414, 6.7483071013813397,
                          6.784032282658837,   0.31897333234569854, 0.0015208382440814669};
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(nig_pdf(xs[i], p) / pdf[i], 1.0, 1e-11) << xs[i];
}

TEST(NigPdf, NormalisedForPublishedParameters) {
    for (const auto& p : kPublished) EXPECT_NEAR(total_mass(p), 1.0, 1e-6) << "a=" << p.a;
}

TEST(NigPdf, WindowOfSixtyScalesHoldsAlmostAllMassForModerateTails) {
    const NigParams p{1.36, 0.22, -0.083, 0.20};
    boost::math::quadrature::tanh_sinh<double> ts;
    const double m = ts.integrate([&](double x) { return nig_pdf(x, p); }, p.x0 - 60 * p.sigma, p.x0 + 60 * p.sigma);
    EXPECT_NEAR(m, 1.0, 1e-6);
}

TEST(NigPdf, SymmetricWhenUnskewed) {
    const NigParams p{0.9, 0.0, 0.3, 0.7};
    for (double d : {0.01, 0.5, 2.0, 17.0}) EXPECT_NEAR(nig_pdf(p.x0 + d, p), nig_pdf(p.x0 - d, p), 1e-10);
}

TEST(NigPdf, HeavyTailedConstantClassPeaksNearZero) {
    const NigParams p{0.12, -0.048, 0.0069, 0.051};
    double best_x = 0.0, best = -1.0;
    for (double x = -0.5; x <= 0.5; x += 1e-5) {
        const double f = nig_pdf(x, p);
        if (f > best) best = f, best_x = x;
    }
    EXPECT_GE(best_x, -0.02);
    EXPECT_LE(best_x, 0.02);
    EXPECT_GT(best, 10.0 * nig_pdf(p.x0 + 3 * p.sigma, p));
}

TEST(NigCdf, MatchesHighPrecisionReference) {
    const NigParams p{0.12, -0.048, 0.0069, 0.051};
    const double xs[] = {-0.3, -0.05, 0.0, 0.01, 0.2, 1.0};
    const double cdf[] = {0.037176927096143891, 0.24139038445283136, 0.49230742049298802,
                          0.56040711133283367,  0.96501503881917645, 0.99967235241163523};
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(nig_cdf(xs[i], p), cdf[i], 1e-10) << xs[i];
}

TEST(NigCdf, AgreesWithIndependentQuadrature) {
    boost::math::quadrature::exp_sinh<double> es;
    for (const auto& p : kPublished) {
        for (double k : {-3.0, -0.4, 0.0, 0.7, 5.0}) {
            const double x = p.x0 + k * p.sigma;
            const double left =
                es.integrate([&](double u) { return nig_pdf(x - u, p); }, 0.0, std::numeric_limits<double>::infinity());
            EXPECT_NEAR(nig_cdf(x, p), left, 1e-8) << "a=" << p.a << " k=" << k;
        }
    }
}

// Near-inverse-Gaussian shape: in standard units the mode sits thousands of
// scales away from x0 and the density underflows around x0.
TEST(NigCdf, ModeFarFromLocation) {
    const NigParams p{7307.92, 7307.92 * std::tanh(12.0), 0.066, 3.5e-5};
    // composite Simpson on a uniform grid fine enough to resolve the peak
    auto simpson = [&](double lo, double hi) {
        const int n = 200000;
        const double h = (hi - lo) / n;
        double acc = nig_pdf(lo, p) + nig_pdf(hi, p);
        for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * nig_pdf(lo + i * h, p);
        return acc * h / 3.0;
    };
    for (double x : {0.1, 0.2, 0.5, 1.5}) {
        const double ref = simpson(p.x0, x);
        EXPECT_NEAR(nig_cdf(x, p), ref, 1e-7) << x;
    }
    EXPECT_GT(nig_quantile(0.5, p), 0.1);
    for (double prob : {0.05, 0.5, 0.95}) EXPECT_NEAR(nig_cdf(nig_quantile(prob, p), p), prob, 1e-6);
}

TEST(NigQuantile, MatchesHighPrecisionReference) {
    const NigParams z{0.12, -0.048, 0.0069, 0.051};
    EXPECT_NEAR(nig_quantile(0.05, z), -0.242611424073003, 1e-8);
    EXPECT_NEAR(nig_quantile(0.5, z), 0.00113728830279523, 1e-8);
    EXPECT_NEAR(nig_quantile(0.95, z), 0.162940492282696, 1e-8);
    const NigParams i{1.36, 0.22, -0.083, 0.20};
    EXPECT_NEAR(nig_quantile(0.05, i), -0.31638900300053, 1e-8);
    EXPECT_NEAR(nig_quantile(0.5, i), -0.0583439493352725, 1e-8);
    EXPECT_NEAR(nig_quantile(0.95, i), 0.243722065329775, 1e-8);
}

TEST(NigQuantile, RoundTripsThroughCdf) {
    for (const auto& p : kPublished)
        for (int k = 1; k <= 19; ++k) {
            const double prob = 0.05 * k;
            EXPECT_NEAR(nig_cdf(nig_quantile(prob, p), p), prob, 1e-6);
        }
}

TEST(NigQuantile, RejectsOutOfRangeProbability) {
    EXPECT_THROW(nig_quantile(0.0, NigParams{}), std::invalid_argument);
    EXPECT_THROW(nig_quantile(1.0, NigParams{}), std::invalid_argument);
}

TEST(NigQuantile, ApproachesGaussianForLargeTailParameter) {
    const NigParams p{400.0, 0.0, 0.2, 3.0};
    const GaussParams g{p.mean(), std::sqrt(p.variance())};
    for (double prob : {0.05, 0.2, 0.8, 0.95}) {
        const double qn = nig_quantile(prob, p) - g.mean;
        const double qg = boost::math::quantile(boost::math::normal(0.0, g.sd), prob);
        EXPECT_NEAR(qn / qg, 1.0, 0.10);
    }
}

TEST(SampleNig, MomentsMatchClosedForm) {
    const NigParams p{1.5, 0.3, 0.1, 0.2};
    Rng rng(11);
    const auto s = sample_nig(p, 200000, rng);
    double m = 0.0, v = 0.0;
    for (double x : s) m += x;
    m /= s.size();
    for (double x : s) v += (x - m) * (x - m);
    v /= s.size();
    EXPECT_NEAR(m, p.mean(), 4.0 * std::sqrt(p.variance() / s.size()));
    EXPECT_NEAR(v / p.variance(), 1.0, 0.02);
}

TEST(SampleNig, HistogramMatchesPdf) {
    const NigParams p{0.8, -0.3, 0.0, 0.5};
    Rng rng(12);
    const auto s = sample_nig(p, 100000, rng);
    for (double lo : {-1.5, -0.5, 0.0, 0.5}) {
        const double hi = lo + 0.25;
        double frac = 0.0;
        for (double x : s) frac += (x >= lo && x < hi);
        frac /= s.size();
        const double prob = nig_cdf(hi, p) - nig_cdf(lo, p);
        EXPECT_NEAR(frac, prob, 4.0 * std::sqrt(prob * (1 - prob) / s.size()));
    }
}

TEST(FitNig, TooFewSamplesThrows) {
    const std::vector<double> one{0.3};
    EXPECT_THROW(fit_nig(one), std::invalid_argument);
    const std::vector<double> seven(7, 1.0);
    EXPECT_THROW(fit_nig(seven), std::invalid_argument);
}

TEST(FitNig, NormalSamplesFitAtLeastAsWellAsGaussian) {
    Rng rng(5);
    std::vector<double> s(5000);
    for (auto& x : s) x = rng.normal();
    const auto n = fit_nig(s);
    const auto g = fit_gaussian(s);
    EXPECT_GE(n.log_likelihood, g.log_likelihood - 2.0);
}

TEST(FitNig, RecoversKnownParameters) {
    const NigParams truth{1.5, 0.3, 0.0, 0.2};
    Rng rng(2024);
    const auto s = sample_nig(truth, 10000, rng);
    const auto f = fit_nig(s);
    EXPECT_NEAR(f.params.a / truth.a, 1.0, 0.15);
    EXPECT_NEAR(f.params.b / truth.b, 1.0, 0.15);
    EXPECT_NEAR(f.params.sigma / truth.sigma, 1.0, 0.15);
    EXPECT_NEAR(f.params.x0, truth.x0, 0.15 * truth.sigma);
}

TEST(FitNig, LikelihoodMatchesPdfSum) {
    Rng rng(8);
    const auto s = sample_nig({0.9, 0.2, 1.0, 0.3}, 500, rng);
    const auto f = fit_nig(s);
    double ll = 0.0;
    for (double x : s) ll += nig_log_pdf(x, f.params);
    EXPECT_NEAR(f.log_likelihood, ll, 1e-8 * std::abs(ll));
}

TEST(FitGaussian, MeanAndMaximumLikelihoodSd) {
    const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
    const auto g = fit_gaussian(s);
    EXPECT_DOUBLE_EQ(g.params.mean, 2.5);
    EXPECT_NEAR(g.params.sd, std::sqrt(1.25), 1e-15);
    double ll = 0.0;
    for (double x : s) ll += gauss_log_pdf(x, g.params);
    EXPECT_NEAR(g.log_likelihood, ll, 1e-12);
    EXPECT_THROW(fit_gaussian(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Bic, Arithmetic) {
    EXPECT_NEAR(model_bic(0.0, 4, std::exp(2.0)), 8.0, 1e-14);
    EXPECT_DOUBLE_EQ(model_bic(10.0, 2, 1), -20.0);
    EXPECT_THROW(model_bic(0.0, 2, 0), std::invalid_argument);
}

TEST(Bic, NigPreferredForSkewedResiduals) {
    const auto s = skewed_mixture(2000, 77);
    const auto c = fit_class(s);
    EXPECT_LT(c.bic_nig, c.bic_gauss);
    EXPECT_EQ(c.chosen, Family::nig);
    EXPECT_LT(c.nig.params.b, 0.0);
}

TEST(IntervalBounds, SymmetricFitGivesSymmetricInterval) {
    ClassFit c;
    c.nig.params = {1.2, 0.0, 0.0, 0.3};
    c.chosen = Family::nig;
    const auto iv = interval_bounds(5.0, c, 0.8);
    EXPECT_NEAR(iv.upper - 5.0, 5.0 - iv.lower, 1e-6);
}

TEST(IntervalBounds, HigherConfidenceContainsLower) {
    ClassFit c;
    c.nig.params = {0.7, -0.2, 0.01, 0.1};
    const auto wide = interval_bounds(1.0, c, 0.9);
    const auto narrow = interval_bounds(1.0, c, 0.6);
    EXPECT_LT(wide.lower, narrow.lower);
    EXPECT_GT(wide.upper, narrow.upper);
    EXPECT_LE(wide.lower, wide.upper);
}

TEST(IntervalBounds, GaussianHalfWidth) {
    ClassFit c;
    c.gauss.params = {0.0, 0.1};
    c.chosen = Family::gaussian;
    const auto iv = interval_bounds(2.0, c, 0.9);
    const double z = boost::math::quantile(boost::math::normal(), 0.95);
    EXPECT_NEAR(iv.upper - 2.0, 0.1645, 1e-3);
    EXPECT_NEAR(iv.upper - 2.0, 0.1 * z, 1e-8);
    EXPECT_NEAR(2.0 - iv.lower, 0.1 * z, 1e-8);
}

TEST(IntervalMetrics, AllInside) {
    const std::vector<Interval> iv{{0, 2}, {1, 3}, {-1, 1}};
    const std::vector<double> y{1, 3, -1};
    const auto m = interval_metrics(iv, y, 0.8);
    EXPECT_DOUBLE_EQ(m.picp, 1.0);
    EXPECT_NEAR(m.ace, 0.2, 1e-15);
    EXPECT_DOUBLE_EQ(m.piaw, 2.0);
}

TEST(IntervalMetrics, DegenerateIntervals) {
    const std::vector<double> y{0.5, -2.0};
    const std::vector<Interval> iv{{0.5, 0.5}, {-2.0, -2.0}};
    const auto m = interval_metrics(iv, y, 0.9);
    EXPECT_DOUBLE_EQ(m.picp, 1.0);
    EXPECT_DOUBLE_EQ(m.piaw, 0.0);
}

TEST(IntervalMetrics, PartialCoverage) {
    const std::vector<Interval> iv{{0, 1}, {0, 1}, {0, 1}, {0, 1}};
    const std::vector<double> y{0.5, 1.5, -0.1, 1.0};
    EXPECT_DOUBLE_EQ(interval_metrics(iv, y, 0.5).picp, 0.5);
}

TEST(IntervalMetrics, BadInputThrows) {
    EXPECT_THROW(interval_metrics(std::vector<Interval>{}, std::vector<double>{}, 0.9), std::invalid_argument);
    EXPECT_THROW(interval_metrics(std::vector<Interval>{{0, 1}}, std::vector<double>{1, 2}, 0.9),
                 std::invalid_argument);
}

TEST(IntervalModel, SparseClassFallsBackToPooledFit) {
    Rng rng(9);
    const std::size_t n = 300;
    std::vector<double> prev(n), pred(n), actual(n);
    for (std::size_t t = 0; t < n; ++t) {
        pred[t] = 10.0 + rng.normal();
        // mostly constant; exactly three increases
        prev[t] = t < 3 ? pred[t] * 1.5 : pred[t] * (1.0 + 0.02 * rng.uniform(-1, 1));
        actual[t] = pred[t] + 0.3 * rng.normal();
    }
    const auto m = fit_interval_model(prev, pred, actual);
    EXPECT_TRUE(m.fit(Tendency::increase).pooled);
    EXPECT_EQ(m.fit(Tendency::increase).samples, 3u);
    EXPECT_TRUE(m.fit(Tendency::decrease).pooled);
    EXPECT_FALSE(m.fit(Tendency::constant).pooled);
    EXPECT_EQ(m.fit(Tendency::constant).samples, n - 3);
    EXPECT_DOUBLE_EQ(m.fit(Tendency::increase).nig.params.a, m.pooled.nig.params.a);
}

TEST(IntervalModel, CoverageIsMonotoneInConfidence) {
    Rng rng(21);
    const std::size_t n = 600;
    std::vector<double> prev(n), pred(n), actual(n);
    const auto noise = skewed_mixture(n, 22);
    for (std::size_t t = 0; t < n; ++t) {
        pred[t] = 5.0 + rng.normal();
        prev[t] = pred[t] * (1.0 + 0.3 * rng.uniform(-1, 1));
        actual[t] = pred[t] + noise[t];
    }
    const auto m = fit_interval_model(prev, pred, actual);
    const std::vector<double> levels{0.6, 0.7, 0.8, 0.9};
    const auto set = predict_intervals(m, prev, pred, levels);
    double last_picp = -1.0, last_piaw = -1.0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        for (const auto& iv : set.bounds[k]) ASSERT_LE(iv.lower, iv.upper);
        const auto met = interval_metrics(set.bounds[k], actual, levels[k]);
        EXPECT_GE(met.picp, last_picp);
        EXPECT_GT(met.piaw, last_piaw);
        last_picp = met.picp;
        last_piaw = met.piaw;
    }
}

TEST(NelderMead, FindsRosenbrockMinimum) {
    auto f = [](const std::vector<double>& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    const auto r = nelder_mead(f, {-1.2, 1.0});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 1.0, 1e-4);
    EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, NonFiniteValuesAreAvoided) {
    auto f = [](const std::vector<double>& x) { return x[0] < 0 ? std::nan("") : (x[0] - 2) * (x[0] - 2); };
    const auto r = nelder_mead(f, {0.5});
    EXPECT_NEAR(r.x[0], 2.0, 1e-4);
}
