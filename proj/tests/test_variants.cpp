#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "rk/errors.hpp"
#include "rk/metrics.hpp"
#include "rk/rng.hpp"
#include "rk/variants.hpp"

using namespace rk;

namespace {

std::vector<double> sin7(std::size_t from, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = 0.5 * std::pow(std::sin(static_cast<double>(from + i) / 5.0), 7);
    return v;
}

Mat<double> sin_inputs(std::size_t from, std::size_t n) {
    Mat<double> u(static_cast<Eigen::Index>(n), 1);
    for (std::size_t i = 0; i < n; ++i) u(static_cast<Eigen::Index>(i), 0) = std::sin(static_cast<double>(from + i) / 5.0);
    return u;
}

Mat<double> col(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

EsnConfig small_periodic(std::uint64_t seed) {
    EsnConfig c;
    c.state_dim = 60;
    c.density = 0.1;
    c.spectral_radius = 0.9;
    c.leaking_rate = 0.8;
    c.regularization = 1e-3;
    c.feedback_dist = FeedbackDist::binary;
    c.feedback_scale = 1.0;
    c.seed = seed;
    return c;
}

// Independent textbook decomposition: explicit weight vector convolution and
// per-phase lists of detrended values.
void textbook_decompose(const std::vector<double>& y, std::size_t P, std::vector<double>& trend,
                        std::vector<double>& seasonal) {
    const std::size_t n = y.size();
    std::vector<double> w;
    if (P % 2 == 0) {
        w.assign(P + 1, 1.0 / static_cast<double>(P));
        w.front() = w.back() = 0.5 / static_cast<double>(P);
    } else {
        w.assign(P, 1.0 / static_cast<double>(P));
    }
    const std::size_t half = w.size() / 2;
    std::vector<double> ma(n, std::nan(""));
    for (std::size_t t = half; t + half < n; ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * y[t - half + j];
        ma[t] = s;
    }
    std::vector<std::vector<double>> phase(P);
    for (std::size_t t = 0; t < n; ++t)
        if (!std::isnan(ma[t])) phase[t % P].push_back(y[t] - ma[t]);
    std::vector<double> fig(P);
    for (std::size_t p = 0; p < P; ++p)
        fig[p] = std::accumulate(phase[p].begin(), phase[p].end(), 0.0) / static_cast<double>(phase[p].size());
    const double m = std::accumulate(fig.begin(), fig.end(), 0.0) / static_cast<double>(P);
    trend = ma;
    for (std::size_t t = 0; t < half; ++t) trend[t] = ma[half];
    for (std::size_t t = n - half; t < n; ++t) trend[t] = ma[n - half - 1];
    seasonal.resize(n);
    for (std::size_t t = 0; t < n; ++t) seasonal[t] = fig[t % P] - m;
}

} // namespace

TEST(Ensemble, SingleMemberMatchesPlainNetwork) {
    const EsnConfig c = small_periodic(3);
    const auto u = sin_inputs(0, 100);
    const auto y = col(sin7(0, 100));
    const auto model = ensemble_train(c, 1, u, y);

    EsnConfig single = c;
    single.seed = member_seed(c.seed, 0);
    const auto m = build_reservoir(single);
    const auto traj = teacher_force<double>(m, single, u, y);
    const auto r = fit_readout(traj, c.regularization, FeatureKind::linear);
    const auto uf = sin_inputs(100, 30);
    const auto fr = free_run<double>(m, single, r, traj.states.row(99).transpose(), y.row(99).transpose(), &uf, 30);
    EXPECT_TRUE(ensemble_forecast(model, &uf, 30) == fr.predictions);
}

TEST(Ensemble, PredictionIsMemberMean) {
    const EsnConfig c = small_periodic(4);
    const auto u = sin_inputs(0, 100);
    const auto model = ensemble_train(c, 5, u, col(sin7(0, 100)));
    const auto uf = sin_inputs(100, 40);
    Mat<double> mean = Mat<double>::Zero(40, 1);
    for (std::size_t i = 0; i < 5; ++i) mean += member_forecast(model, i, &uf, 40);
    mean /= 5.0;
    EXPECT_LE((ensemble_forecast(model, &uf, 40) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ensemble, OppositeMembersCancel) {
    const EsnConfig c = small_periodic(5);
    const auto u = sin_inputs(0, 100);
    auto model = ensemble_train(c, 2, u, col(sin7(0, 100)));
    model.members[1] = model.members[0];
    model.members[1].readout.W_out *= -1.0;
    const auto uf = sin_inputs(100, 1);
    // one step from identical states gives p and -p
    EXPECT_LE(ensemble_forecast(model, &uf, 1).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Ensemble, AveragingReducesRunToRunVariance) {
    const auto u = sin_inputs(0, 100), uf = sin_inputs(100, 30);
    const auto y = col(sin7(0, 100));
    auto spread = [&](std::size_t members) {
        std::vector<Mat<double>> runs;
        for (std::uint64_t s = 0; s < 6; ++s) {
            EsnConfig c = small_periodic(100 + s);
            c.teacher_noise = 0.01;
            c.regularization = 1e-2;
            runs.push_back(ensemble_forecast(ensemble_train(c, members, u, y), &uf, 30));
        }
        Mat<double> mean = Mat<double>::Zero(30, 1);
        for (const auto& r : runs) mean += r;
        mean /= static_cast<double>(runs.size());
        double v = 0.0;
        for (const auto& r : runs) v += (r - mean).squaredNorm();
        return v / static_cast<double>(runs.size());
    };
    EXPECT_LT(spread(16), spread(1));
}

TEST(Ensemble, AllMembersDivergingIsAnError) {
    const EsnConfig c = small_periodic(6);
    Mat<double> y = col(sin7(0, 50));
    y(20, 0) = std::nan("");
    EXPECT_THROW(ensemble_train(c, 3, sin_inputs(0, 50), y), NumericalError);
}

TEST(Decompose, ConstantSeries) {
    std::vector<double> y(60, 2.5);
    const auto d = decompose_additive(y, 12);
    for (std::size_t t = 0; t < y.size(); ++t) {
        EXPECT_NEAR(d.trend[t], 2.5, 1e-12);
        EXPECT_NEAR(d.seasonal[t], 0.0, 1e-12);
        EXPECT_NEAR(d.residual[t], 0.0, 1e-12);
    }
}

TEST(Decompose, PurePeriodicHasNoResidual) {
    const std::size_t P = 7;
    std::vector<double> y(50);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = std::sin(2.0 * M_PI * static_cast<double>(t) / P) + (t % P == 2 ? 0.3 : 0.0) - 0.3 / P;
    const auto d = decompose_additive(y, P);
    for (std::size_t t = P; t + P < y.size(); ++t) EXPECT_LE(std::abs(d.residual[t]), 1e-10);
}

TEST(Decompose, MatchesTextbookOracle) {
    for (std::size_t P : {12u, 13u, 52u}) {
        Rng rng(P);
        std::vector<double> y(4 * P + 5);
        for (std::size_t t = 0; t < y.size(); ++t)
            y[t] = 0.02 * static_cast<double>(t) + std::sin(2.0 * M_PI * static_cast<double>(t) / static_cast<double>(P)) + 0.1 * rng.normal();
        const auto d = decompose_additive(y, P);
        std::vector<double> trend, seasonal;
        textbook_decompose(y, P, trend, seasonal);
        for (std::size_t t = 0; t < y.size(); ++t) {
            EXPECT_NEAR(d.trend[t], trend[t], 1e-8) << "P=" << P << " t=" << t;
            EXPECT_NEAR(d.seasonal[t], seasonal[t], 1e-8);
            EXPECT_NEAR(d.residual[t], y[t] - trend[t] - seasonal[t], 1e-8);
        }
    }
}

TEST(Decompose, ComponentsSumToSeries) {
    Rng rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> y(40 + rep * 3);
        for (auto& v : y) v = rng.normal() * 10.0;
        const auto d = decompose_additive(y, 4 + static_cast<std::size_t>(rep % 9));
        for (std::size_t t = 0; t < y.size(); ++t) EXPECT_LE(std::abs(d.trend[t] + d.seasonal[t] + d.residual[t] - y[t]), 1e-12);
    }
}

TEST(Decompose, TooShortIsAnError) {
    std::vector<double> y(23, 1.0);
    EXPECT_THROW(decompose_additive(y, 12), std::invalid_argument);
}

TEST(Adf, MatchesReferenceImplementation) {
    // reference values from an independent ADF implementation (constant term, fixed lags)
    std::vector<double> y(200), z(200);
    double acc = 0.0;
    for (int t = 0; t < 200; ++t) {
        y[t] = std::sin(0.7 * t) + 0.3 * std::cos(1.9 * t + 0.4) + 0.002 * t;
        acc += std::sin(1.3 * t) + 0.5 * std::cos(0.37 * t * t / 50.0);
        z[t] = acc;
    }
    EXPECT_NEAR(adf_statistic(y, 3).t_statistic, -48.10408112546841, 1e-7);
    EXPECT_NEAR(adf_statistic(z, 2).t_statistic, -5.983436609631567, 1e-8);
}

TEST(Adf, WhiteNoiseRejectsUnitRoot) {
    int rejected = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(s);
        std::vector<double> y(500);
        for (auto& v : y) v = rng.normal();
        rejected += adf_statistic(y, 4).reject_unit_root;
    }
    EXPECT_GE(rejected, 190);
}

TEST(Adf, RandomWalkKeepsUnitRoot) {
    int kept = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(1000 + s);
        std::vector<double> y(500);
        double a = 0.0;
        for (auto& v : y) v = (a += rng.normal());
        kept += !adf_statistic(y, 4).reject_unit_root;
    }
    EXPECT_GE(kept, 180);
}

TEST(Adf, ShortSeriesIsAnError) {
    std::vector<double> y(6, 1.0);
    EXPECT_THROW(adf_statistic(y, 4), std::invalid_argument);
}

TEST(Drc, ConstantSeriesReducesToTrendModel) {
    std::vector<double> y(120, 0.3);
    DrcConfig cfg;
    cfg.period = 12;
    for (EsnConfig* c : {&cfg.trend, &cfg.seasonal, &cfg.residual}) {
        *c = small_periodic(9);
        c->constant_input = 1.0;
        c->regularization = 1e-2;
    }
    const auto model = drc_train(y, Mat<double>(), cfg);
    const auto f = drc_predict(model, nullptr, 20);
    const Mat<double> u = constant_inputs<double>(model.trend_model.shared_config, 20);
    const auto trend = ensemble_forecast(model.trend_model, &u, 20);
    for (int h = 0; h < 20; ++h) EXPECT_NEAR(f[static_cast<std::size_t>(h)], trend(h, 0), 1e-12);
}

TEST(Drc, TrainingSpanReconstructs) {
    Rng rng(12);
    std::vector<double> y(160);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = 0.01 * static_cast<double>(t) + 0.3 * std::sin(2 * M_PI * static_cast<double>(t) / 12.0) + 0.05 * rng.normal();
    DrcConfig cfg;
    cfg.period = 12;
    for (EsnConfig* c : {&cfg.trend, &cfg.seasonal, &cfg.residual}) {
        *c = small_periodic(10);
        c->constant_input = 1.0;
    }
    const auto model = drc_train(y, Mat<double>(), cfg);
    for (std::size_t t = 0; t < y.size(); ++t)
        EXPECT_NEAR(model.parts.trend[t] + model.parts.seasonal[t] + model.parts.residual[t], y[t], 1e-12);
    const auto f = drc_predict(model, nullptr, 12);
    EXPECT_EQ(f.size(), 12u);
    for (double v : f) EXPECT_TRUE(std::isfinite(v));
}

TEST(Ngrc, FeatureEnumeration) {
    std::vector<double> y{2.0, 3.0};
    const auto f = ngrc_feature_vector(y, 1, 1);
    const std::vector<double> want{1, 3, 2, 9, 6, 4};
    ASSERT_EQ(f.size(), 6);
    for (int i = 0; i < 6; ++i) EXPECT_EQ(f[i], want[static_cast<std::size_t>(i)]);
}

TEST(Ngrc, FeatureCount) {
    std::vector<double> y(20, 0.5);
    for (std::size_t k = 1; k <= 6; ++k) {
        EXPECT_EQ(ngrc_feature_count(k), 1 + (k + 1) + (k + 1) * (k + 2) / 2);
        EXPECT_EQ(static_cast<std::size_t>(ngrc_features(y, k).cols()), ngrc_feature_count(k));
    }
    EXPECT_THROW(ngrc_feature_vector(y, 2, 3), std::invalid_argument);
}

TEST(Ngrc, PeriodicTaskOneStep) {
    const auto train = sin7(0, 100);
    const auto model = ngrc_train(train, {3, 0.56});
    const auto all = sin7(0, 150);
    const auto pred = ngrc_one_step(model, all, 100);
    const std::vector<double> actual(all.begin() + 100, all.end());
    EXPECT_LE(mse(pred, actual), 0.05);
    // no randomness anywhere
    const auto again = ngrc_train(train, {3, 0.56});
    EXPECT_TRUE(again.weights == model.weights);
}

TEST(Ngrc, ForecastContinuesFromTail) {
    // a linear recurrence is reproduced exactly by the linear terms
    std::vector<double> y(60);
    y[0] = 0.1;
    y[1] = 0.2;
    for (std::size_t t = 2; t < y.size(); ++t) y[t] = 0.5 * y[t - 1] + 0.3 * y[t - 2];
    const auto model = ngrc_train(std::span<const double>(y).first(40), {2, 1e-12});
    const auto f = ngrc_forecast(model, 20);
    for (std::size_t h = 0; h < 20; ++h) EXPECT_NEAR(f[h], y[40 + h], 1e-6);
}

TEST(MultiStep, RejectsDegenerateSplit) {
    MultiStepConfig ms;
    ms.base = small_periodic(1);
    const auto u = sin_inputs(0, 100);
    const auto y = col(sin7(0, 100));
    ms.split_fraction = 1.0;
    EXPECT_THROW(multi_step_train<double>(u, y, ms), std::invalid_argument);
    ms.split_fraction = 0.05;
    EXPECT_THROW(multi_step_train<double>(u, y, ms), std::invalid_argument);
}

TEST(MultiStep, SelfConsistentDataLeavesReadoutUnchanged) {
    EsnConfig c;
    c.state_dim = 20;
    c.input_dim = 1;
    c.density = 0.2;
    c.spectral_radius = 0.8;
    c.regularization = 0.0;
    c.seed = 21;
    const auto m = build_reservoir(c);
    Rng rng(4);
    Mat<double> u(400, 1);
    for (int t = 0; t < 400; ++t) u(t, 0) = rng.uniform(-1, 1);
    LinearReadout<double> truth;
    truth.W_out.resize(1, 20);
    for (int i = 0; i < 20; ++i) truth.W_out(0, i) = rng.uniform(-0.3, 0.3);
    Vec<double> y0(1);
    y0 << 0.7;
    const auto gen = free_run<double>(m, c, truth, Vec<double>::Zero(20), y0, &u, 400);
    MultiStepConfig ms;
    ms.base = c;
    const auto r = multi_step_train<double>(m, u, gen.predictions, ms, y0);
    EXPECT_LE((r.phase_a_readout.W_out - truth.W_out).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE((r.readout.W_out - r.phase_a_readout.W_out).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(MultiStep, PhaseBIgnoresSegmentTwoTargets) {
    MultiStepConfig ms;
    ms.base = small_periodic(2);
    const auto u = sin_inputs(0, 200);
    Mat<double> y = col(sin7(0, 200));
    const auto clean = multi_step_train<double>(u, y, ms);
    for (Eigen::Index t = static_cast<Eigen::Index>(clean.split_index); t < 200; ++t) y(t, 0) = std::nan("");
    const auto tainted = multi_step_train<double>(u, y, ms);
    EXPECT_TRUE(tainted.phase_b_states == clean.phase_b_states);
    EXPECT_EQ(clean.split_index, 170u);
}
