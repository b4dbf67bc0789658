#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rk/crosscorr.hpp"
#include "rk/metrics.hpp"
#include "rk/rng.hpp"

using namespace rk;

namespace {

std::vector<double> white(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

std::vector<double> ar1(std::size_t n, double phi, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    double s = 0.0;
    for (std::size_t i = 0; i < 200; ++i) s = phi * s + rng.normal(); // burn-in
    for (auto& x : v) x = s = phi * s + rng.normal();
    return v;
}

} // namespace

TEST(Ccf, MatchesDirectPairwiseComputation) {
    // reference values from a direct pairwise evaluation of the same sums
    const std::vector<double> x{1, 3, 2, 5, 4, 6, 8, 7, 9, 12};
    const std::vector<double> y{2, 1, 4, 3, 6, 5, 5, 9, 8, 10};
    const double ref[] = {0.30886383640502235, 0.4583388256201802, 0.8940061465240382, 0.8202385845096547,
                          0.840752698800869,   0.654306760872355,  0.0414398032864381};
    const auto c = ccf(x, y, 3);
    for (int h = -3; h <= 3; ++h) EXPECT_NEAR(c.at(h), ref[h + 3], 1e-14) << h;
}

TEST(Ccf, SelfAtLagZeroIsOne) {
    const auto x = white(100, 1);
    EXPECT_NEAR(ccf(x, x, 5).at(0), 1.0, 1e-15);
}

TEST(Ccf, PastOfXPredictingYPeaksAtNegativeLag) {
    // y[t] = x[t-2]: x two steps in the past explains y now
    const auto x = white(300, 2);
    std::vector<double> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) y[t] = t >= 2 ? x[t - 2] : 0.0;
    const auto c = ccf(x, y, 6);
    int arg = 0;
    for (int h = -6; h <= 6; ++h)
        if (std::abs(c.at(h)) > std::abs(c.at(arg))) arg = h;
    EXPECT_EQ(arg, -2);
    EXPECT_GT(c.at(-2), 0.99);
}

TEST(Ccf, SwappingArgumentsMirrorsLags) {
    const auto x = white(200, 3), y = ar1(200, 0.6, 4);
    const auto a = ccf(x, y, 8), b = ccf(y, x, 8);
    for (int h = -8; h <= 8; ++h) EXPECT_NEAR(a.at(h), b.at(-h), 1e-10);
}

TEST(Ccf, InvariantUnderPositiveAffineMaps) {
    const auto x = white(150, 5), y = ar1(150, 0.3, 6);
    std::vector<double> xs(x.size()), ys(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs[i] = 3.5 * x[i] - 7.0;
        ys[i] = 0.2 * y[i] + 100.0;
    }
    const auto a = ccf(x, y, 5), b = ccf(xs, ys, 5);
    for (int h = -5; h <= 5; ++h) EXPECT_NEAR(a.at(h), b.at(h), 1e-10);
}

TEST(Ccf, BoundedByOne) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto x = ar1(60, 0.9, s), y = ar1(60, -0.5, s + 100);
        for (double v : ccf(x, y, 20).values) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
    }
}

TEST(Ccf, IndependentWhiteNoiseStaysWithinThreeSigma) {
    const std::size_t n = 500;
    const int H = 10;
    std::size_t exceed = 0, total = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto c = ccf(white(n, 2 * s + 10), white(n, 2 * s + 11), H);
        for (double v : c.values) {
            exceed += std::abs(v) >= 3.0 / std::sqrt(double(n));
            ++total;
        }
    }
    EXPECT_LE(double(exceed) / double(total), 0.01);
}

TEST(Ccf, BadInputThrows) {
    const std::vector<double> c(20, 1.0), x = white(20, 1);
    EXPECT_THROW(ccf(c, x, 2), std::invalid_argument);
    EXPECT_THROW(ccf(x, x, 18), std::invalid_argument);
    EXPECT_THROW(ccf(x, std::vector<double>(19, 0.0), 2), std::invalid_argument);
}

TEST(ArFit, RecoversAr1Coefficient) {
    const auto x = ar1(2000, 0.8, 7);
    const auto m = ar_fit(x, 8);
    EXPECT_EQ(m.order, 1u);
    EXPECT_NEAR(m.phi[0], 0.8, 0.05);
    EXPECT_EQ(m.residuals.size(), x.size() - 1);
}

TEST(ArFit, WhiteNoiseSelectsSmallOrder) {
    int small = 0;
    for (std::uint64_t s = 0; s < 100; ++s) small += ar_fit(white(300, 1000 + s), 8).order <= 2;
    EXPECT_GE(small, 90);
}

TEST(ArFit, ResidualsMatchLeastSquaresFit) {
    // AR(2) with known structure; residuals must be orthogonal to the lags
    Rng rng(8);
    std::vector<double> x(1500);
    double a = 0, b = 0;
    for (auto& v : x) {
        v = 1.2 * a - 0.5 * b + rng.normal() + 3.0;
        b = a;
        a = v - 3.0;
    }
    const auto m = ar_fit(x, 8);
    ASSERT_EQ(m.order, 2u);
    EXPECT_NEAR(m.phi[0], 1.2, 0.06);
    EXPECT_NEAR(m.phi[1], -0.5, 0.06);
    for (std::size_t lag = 1; lag <= 2; ++lag) {
        double dot = 0.0;
        for (std::size_t t = 2; t < x.size(); ++t) dot += m.residuals[t - 2] * (x[t - lag] - m.mean);
        EXPECT_NEAR(dot / x.size(), 0.0, 1e-9);
    }
}

TEST(ArFit, ConstantOrShortSeriesThrows) {
    EXPECT_THROW(ar_fit(std::vector<double>(100, 4.2), 8), std::invalid_argument);
    EXPECT_THROW(ar_fit(white(24, 1), 8), std::invalid_argument);
}

TEST(Prewhiten, WhiteInputIsNearlyUnchanged) {
    const auto x = white(400, 9), y = white(400, 10);
    const auto p = prewhiten(x, y);
    for (double phi : p.model.phi) EXPECT_LT(std::abs(phi), 0.15);
    const std::size_t off = p.model.order;
    double mx = 0;
    for (double v : x) mx += v;
    mx /= x.size();
    double diff = 0.0;
    for (std::size_t t = off; t < x.size(); ++t) diff = std::max(diff, std::abs(p.x_resid[t - off] - (x[t] - mx)));
    EXPECT_LT(diff, 0.5);
}

TEST(Prewhiten, RemovesSharedSeasonalPattern) {
    // Independent noise around a common seasonal cycle. The raw CCF flags
    // nearly every lag; after pre-whitening the count of flagged lags falls
    // to the order of the 5% false-positive budget (1.25 of 25 lags).
    const std::size_t n = 400;
    const int H = 12, seeds = 20;
    double raw = 0.0, white_count = 0.0;
    for (int k = 0; k < seeds; ++k) {
        const auto ex = white(n, 100 + 2 * k), ey = white(n, 101 + 2 * k);
        std::vector<double> x(n), y(n);
        for (std::size_t t = 0; t < n; ++t) {
            const double s = 2.0 * std::sin(2.0 * std::numbers::pi * double(t) / 12.0);
            x[t] = s + ex[t];
            y[t] = s + ey[t];
        }
        raw += double(significant_lags(ccf(x, y, H)).size());
        const auto p = prewhiten(x, y);
        white_count += double(significant_lags(ccf(p.x_resid, p.y_filtered, H)).size());
    }
    EXPECT_GE(raw / seeds, 20.0);
    EXPECT_LE(white_count / seeds, 2.5);
}

TEST(Prewhiten, RevealsOneStepLead) {
    const std::size_t n = 600;
    const auto x = ar1(n, 0.85, 13);
    const auto e = white(n, 14);
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = (t ? x[t - 1] : 0.0) + 0.8 * e[t];
    const auto p = prewhiten(x, y);
    const auto c = ccf(p.x_resid, p.y_filtered, 6);
    const auto sig = significant_lags(c);
    ASSERT_FALSE(sig.empty());
    int arg = 0;
    for (int h = -6; h <= 6; ++h)
        if (std::abs(c.at(h)) > std::abs(c.at(arg))) arg = h;
    EXPECT_EQ(arg, -1);
    EXPECT_NE(std::find(sig.begin(), sig.end(), -1), sig.end());
    for (int h : sig) EXPECT_LE(std::abs(h + 1), 1) << h;
}

TEST(SignificantLags, Arithmetic) {
    LagCorrelation c;
    c.max_lag = 2;
    c.n = 100;
    c.values = {0.0, 0.0, 0.0, 0.0, 0.0};
    EXPECT_TRUE(significant_lags(c).empty());
    c.values[1] = 0.5; // h = -1
    c.values[3] = 0.19;
    EXPECT_EQ(significant_lags(c), std::vector<int>{-1});
}

TEST(SignificantLags, WhiteNoiseFalsePositiveRate) {
    const int H = 10;
    double count = 0.0;
    const int trials = 400;
    for (int s = 0; s < trials; ++s)
        count += double(significant_lags(ccf(white(400, 5000 + 2 * s), white(400, 5001 + 2 * s), H)).size());
    const double expected = 0.05 * (2 * H + 1);
    EXPECT_NEAR(count / trials, expected, 0.25 * expected);
}

TEST(Network, SingleSeriesThrows) {
    EXPECT_THROW(build_network({"a"}, {white(100, 1)}, 4), std::invalid_argument);
}

TEST(Network, RecoversConstructedChain) {
    // B follows A with lag 1; C follows B's own innovation with lag 2, so A
    // carries no linear information about C.
    const std::size_t n = 1000;
    const auto a = white(n, 21), eb = white(n, 22), ec = white(n, 23);
    std::vector<double> b(n), c(n);
    for (std::size_t t = 0; t < n; ++t) {
        b[t] = (t >= 1 ? a[t - 1] : 0.0) + eb[t];
        c[t] = (t >= 2 ? eb[t - 2] : 0.0) + 0.5 * ec[t];
    }
    const double z = 3.29; // two-sided 0.1%
    const auto net = build_network({"A", "B", "C"}, {a, b, c}, 5, z);
    ASSERT_EQ(net.edges.size(), 2u);
    EXPECT_EQ(net.edges[0].src, 0u);
    EXPECT_EQ(net.edges[0].dst, 1u);
    EXPECT_EQ(net.edges[0].lags, std::vector<int>{1});
    EXPECT_EQ(net.edges[1].src, 1u);
    EXPECT_EQ(net.edges[1].dst, 2u);
    EXPECT_EQ(net.edges[1].lags, std::vector<int>{2});
    for (const auto& e : net.edges)
        for (int l : e.lags) EXPECT_GE(l, 1);
}

TEST(Network, IndependentSeriesStayNearFalsePositiveBudget) {
    const int H = 4, trials = 60;
    double edges = 0.0;
    for (int s = 0; s < trials; ++s) {
        const auto net = build_network({"a", "b", "c"}, {white(300, 7000 + 3 * s), white(300, 7001 + 3 * s),
                                                         white(300, 7002 + 3 * s)}, H);
        edges += double(net.edges.size());
    }
    // 6 ordered pairs, each with H one-sided tests at 5%
    const double budget = 6.0 * (1.0 - std::pow(0.95, H));
    EXPECT_NEAR(edges / trials, budget, 0.35 * budget);
}

TEST(Network, JsonExport) {
    CcfNetwork net;
    net.nodes = {"x", "y"};
    net.edges.push_back({0, 1, {1, 3}});
    const auto j = nlohmann::json::parse(network_to_json(net));
    EXPECT_EQ(j["nodes"][1], "y");
    EXPECT_EQ(j["edges"][0]["src"], "x");
    EXPECT_EQ(j["edges"][0]["dst"], "y");
    EXPECT_EQ(j["edges"][0]["lags"], nlohmann::json::array({1, 3}));
}

TEST(Delayed, ShiftsAndPadsWithFirstValue) {
    const std::vector<double> s{1, 2, 3, 4};
    EXPECT_EQ(delayed(s, 2), (std::vector<double>{1, 1, 1, 2}));
    EXPECT_EQ(delayed(s, 0), s);
}

namespace {

// Ordinary least squares of y[t] on (1, y[t-1], chosen candidates), fitted
// on [1, train) and scored by MAE on [train, n).
SubsetEvaluator ols_evaluator(const std::vector<double>& y, const std::vector<std::vector<double>>& cands,
                              std::size_t train) {
    return [&y, &cands, train](const std::vector<std::size_t>& sub) {
        const std::size_t n = y.size(), k = 2 + sub.size();
        Eigen::MatrixXd X(train - 1, k);
        Eigen::VectorXd b(train - 1);
        for (std::size_t t = 1; t < train; ++t) {
            X(t - 1, 0) = 1.0;
            X(t - 1, 1) = y[t - 1];
            for (std::size_t i = 0; i < sub.size(); ++i) X(t - 1, 2 + i) = cands[sub[i]][t];
            b(t - 1) = y[t];
        }
        const Eigen::VectorXd w = X.colPivHouseholderQr().solve(b);
        double err = 0.0;
        for (std::size_t t = train; t < n; ++t) {
            double p = w(0) + w(1) * y[t - 1];
            for (std::size_t i = 0; i < sub.size(); ++i) p += w(2 + i) * cands[sub[i]][t];
            err += std::abs(p - y[t]);
        }
        return err / double(n - train);
    };
}

} // namespace

TEST(SelectSubset, NoCandidatesGivesEmptySubset) {
    const auto r = select_subset(0, [](const std::vector<std::size_t>&) { return 0.7; });
    EXPECT_TRUE(r.subset.empty());
    EXPECT_DOUBLE_EQ(r.score, 0.7);
    EXPECT_DOUBLE_EQ(r.baseline, 0.7);
    EXPECT_EQ(r.evaluated, 1u);
}

TEST(SelectSubset, EvaluatesEverySubset) {
    std::size_t calls = 0;
    const auto r = select_subset(4, [&](const std::vector<std::size_t>& s) {
        ++calls;
        return s == std::vector<std::size_t>{1, 3} ? 0.1 : 1.0;
    });
    EXPECT_EQ(calls, 16u);
    EXPECT_EQ(r.evaluated, 16u);
    EXPECT_EQ(r.subset, (std::vector<std::size_t>{1, 3}));
}

TEST(SelectSubset, TiesPreferSmallerThenLexicographic) {
    const auto r = select_subset(3, [](const std::vector<std::size_t>& s) { return s.empty() ? 2.0 : 1.0; });
    EXPECT_EQ(r.subset, std::vector<std::size_t>{0});
    const auto r2 = select_subset(3, [](const std::vector<std::size_t>& s) { return s.size() == 2 ? 0.5 : 1.0; });
    EXPECT_EQ(r2.subset, (std::vector<std::size_t>{0, 1}));
}

TEST(SelectSubset, TooManyCandidatesNeedsGreedy) {
    auto f = [](const std::vector<std::size_t>& s) {
        double v = 10.0;
        for (auto i : s) v += (i == 4 || i == 9) ? -3.0 : 0.5;
        return v;
    };
    EXPECT_THROW(select_subset(13, f), std::invalid_argument);
    const auto r = select_subset(13, f, SubsetSearch::greedy);
    EXPECT_EQ(r.subset, (std::vector<std::size_t>{4, 9}));
    EXPECT_DOUBLE_EQ(r.score, 4.0);
}

TEST(SelectSubset, NeverWorseThanEmpty) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> table(1u << 5);
        for (auto& v : table) v = rng.uniform();
        auto f = [&](const std::vector<std::size_t>& s) {
            std::size_t mask = 0;
            for (auto i : s) mask |= 1u << i;
            return table[mask];
        };
        for (auto mode : {SubsetSearch::exhaustive, SubsetSearch::greedy}) {
            const auto r = select_subset(5, f, mode);
            EXPECT_LE(r.score, r.baseline);
        }
    }
}

TEST(SelectSubset, UninformativeCandidatesLeaveSubsetEmpty) {
    int empty = 0;
    const int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
        const std::size_t train = 500, n = train + 200000;
        const auto y = ar1(n, 0.7, 9000 + 4 * s);
        const std::vector<std::vector<double>> cands{white(n, 9001 + 4 * s), white(n, 9002 + 4 * s),
                                                     white(n, 9003 + 4 * s)};
        empty += select_subset(3, ols_evaluator(y, cands, train)).subset.empty();
    }
    EXPECT_GE(empty, 160); // 80% of seeds
}

TEST(SelectSubset, TrueDelayedDriverWinsWithReservoirModel) {
    const std::size_t n = 500;
    const auto x = ar1(n, 0.5, 41);
    const auto e = white(n, 42);
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = (t >= 2 ? std::tanh(x[t - 2]) : 0.0) + 0.05 * e[t];
    const std::vector<Candidate> cands{{"noise1", white(n, 43)}, {"x_lag2", delayed(x, 2)}, {"noise2", white(n, 44)}};
    EsnConfig cfg;
    cfg.state_dim = 60;
    cfg.spectral_radius = 0.5;
    cfg.density = 0.1;
    cfg.regularization = 1e-4;
    cfg.feedback_scale = 0.1;
    cfg.input_scale = 0.5;
    cfg.seed = 5;
    const auto eval = esn_subset_evaluator(cfg, 3, y, cands, 350);
    const auto r = select_subset(cands.size(), eval);
    EXPECT_EQ(r.subset, std::vector<std::size_t>{1});
    EXPECT_LT(r.score, 0.5 * r.baseline);
}
