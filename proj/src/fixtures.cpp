#include "rk/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rk/errors.hpp"
#include "rk/metrics.hpp"
#include "rk/rng.hpp"

namespace rk::fixtures {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> white(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

std::vector<double> ar1(std::size_t n, double phi, Rng& rng) {
    std::vector<double> v(n);
    double s = 0.0;
    for (std::size_t i = 0; i < 200; ++i) s = phi * s + rng.normal();
    for (auto& x : v) x = s = phi * s + rng.normal();
    return v;
}

} // namespace

// ------------------------------------------------------- periodic toy task

PeriodicTask periodic_task() {
    PeriodicTask p;
    const Eigen::Index n = static_cast<Eigen::Index>(p.train + p.test);
    p.inputs.resize(n, 1);
    p.targets.resize(n, 1);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double u = std::sin(static_cast<double>(t) / 5.0);
        p.inputs(t, 0) = u;
        p.targets(t, 0) = 0.5 * std::pow(u, 7);
    }
    return p;
}

std::string to_string(ReservoirStyle s) {
    switch (s) {
    case ReservoirStyle::inhomogeneous_sparse: return "inhomogeneous-sparse";
    case ReservoirStyle::inhomogeneous_dense: return "inhomogeneous-dense";
    case ReservoirStyle::homogeneous_sparse: return "homogeneous-sparse";
    case ReservoirStyle::homogeneous_dense: return "homogeneous-dense";
    }
    return "?";
}

EsnConfig periodic_config(ReservoirStyle style, std::uint64_t seed) {
    EsnConfig c;
    c.input_dim = 1;
    c.output_dim = 1;
    c.state_dim = 200;
    c.spectral_radius = 1.3;
    c.leaking_rate = 0.8;
    c.teacher_noise = 0.1;
    c.regularization = 0.01;
    c.transient = 10;
    c.input_scale = 1.0;
    c.feedback_scale = 1.0;
    c.feedback_dist = FeedbackDist::binary;
    c.output_activation = OutputActivation::tanh;
    c.seed = seed;
    const bool sparse = style == ReservoirStyle::inhomogeneous_sparse || style == ReservoirStyle::homogeneous_sparse;
    const bool inhomogeneous =
        style == ReservoirStyle::inhomogeneous_sparse || style == ReservoirStyle::inhomogeneous_dense;
    c.density = sparse ? 0.05 : 1.0;
    c.weight_sign = inhomogeneous ? WeightSign::inhomogeneous : WeightSign::homogeneous;
    return c;
}

double periodic_test_mse(ReservoirStyle style, std::uint64_t seed) {
    const auto task = periodic_task();
    const auto tr = static_cast<Eigen::Index>(task.train), te = static_cast<Eigen::Index>(task.test);
    const auto model = ensemble_train(periodic_config(style, seed), 1, task.inputs.topRows(tr), task.targets.topRows(tr));
    const Mat<double> future = task.inputs.bottomRows(te);
    const Mat<double> p = ensemble_forecast(model, &future, task.test);
    return (p - task.targets.bottomRows(te)).squaredNorm() / static_cast<double>(te);
}

// ---------------------------------------------------------- heat equation

Mat<double> heat_solution(std::size_t points, std::size_t steps, double dt) {
    if (points < 2) throw std::invalid_argument("heat_solution: need at least 2 points");
    Mat<double> y(static_cast<Eigen::Index>(steps + 1), static_cast<Eigen::Index>(points));
    for (Eigen::Index t = 0; t < y.rows(); ++t)
        for (Eigen::Index k = 0; k < y.cols(); ++k)
            y(t, k) = std::sin(kPi * static_cast<double>(k) / static_cast<double>(points - 1)) *
                      std::exp(-static_cast<double>(t) * dt);
    return y;
}

EsnConfig heat_config(bool improved, std::uint64_t seed) {
    EsnConfig c;
    c.output_dim = 100;
    c.state_dim = 400;
    c.density = 0.02;
    c.spectral_radius = 0.9;
    c.leaking_rate = 1.0;
    c.transient = 200;
    c.feedback_scale = 0.5;
    c.feedback_dist = FeedbackDist::uniform;
    c.output_activation = OutputActivation::tanh;
    c.seed = seed;
    if (improved) {
        c.teacher_noise = 0.001;
        c.regularization = 1e-12;
        c.input_dim = 5;
        c.constant_input = 1.0;
        c.input_scale = 0.14;
    } else {
        c.teacher_noise = 0.0;
        c.regularization = 0.0;
        c.input_dim = 0;
    }
    return c;
}

HeatOutcome heat_free_run(bool improved, std::uint64_t seed) {
    const EsnConfig c = heat_config(improved, seed);
    const Mat<double> y = heat_solution(c.output_dim);
    const auto T = static_cast<Eigen::Index>(kHeatTrainSteps);
    HeatOutcome out;
    try {
        const auto model = ensemble_train(c, 1, constant_inputs<double>(c, kHeatTrainSteps), y.topRows(T));
        const std::size_t horizon = static_cast<std::size_t>(y.rows() - T);
        const Mat<double> p = ensemble_forecast(model, nullptr, horizon);
        out.test_mse = (p - y.bottomRows(static_cast<Eigen::Index>(horizon))).squaredNorm() /
                       static_cast<double>(p.size());
    } catch (const NumericalError& e) {
        out.failed = true;
        out.failure = e.what();
        out.test_mse = std::numeric_limits<double>::infinity();
    }
    return out;
}

// ------------------------------------------------- seasonal benchmark

SeasonalSeries seasonal_benchmark(std::uint64_t seed) {
    SeasonalSeries s;
    const std::size_t n = s.train + s.test;
    Rng shape = Rng::stream(seed, 10);
    const double a1 = shape.uniform(0.8, 1.2), a2 = shape.uniform(0.2, 0.5);
    const double f1 = shape.uniform(0.0, 2 * kPi), f2 = shape.uniform(0.0, 2 * kPi), f3 = shape.uniform(0.0, 2 * kPi);
    const double slope = shape.uniform(0.3, 0.6);
    Rng reg = Rng::stream(seed, 11);
    const auto r1 = ar1(n, 0.8, reg);
    Rng noise = Rng::stream(seed, 12);
    s.regressors.resize(static_cast<Eigen::Index>(n), 2);
    s.y.resize(n);
    const double P = static_cast<double>(s.period);
    for (std::size_t t = 0; t < n; ++t) {
        const double tt = static_cast<double>(t);
        const double trend = slope * tt / static_cast<double>(n) + 0.3 * std::sin(2 * kPi * tt / 400.0 + f3);
        const double seasonal = a1 * std::sin(2 * kPi * tt / P + f1) + a2 * std::sin(4 * kPi * tt / P + f2);
        const double volume = std::cos(2 * kPi * tt / P + f1) + 0.3 * noise.normal();
        const double residual = 0.3 * r1[t] / std::sqrt(1.0 / (1.0 - 0.64)) + 0.1 * noise.normal();
        s.y[t] = 3.0 + trend + seasonal + residual;
        s.regressors(static_cast<Eigen::Index>(t), 0) = r1[t];
        s.regressors(static_cast<Eigen::Index>(t), 1) = volume;
    }
    return s;
}

EsnConfig srcrc_config(std::uint64_t seed) {
    EsnConfig c;
    c.input_dim = 2;
    c.output_dim = 1;
    c.leaking_rate = 0.81;
    c.state_dim = 120;
    c.regularization = 2.6;
    c.spectral_radius = 0.52;
    c.density = 0.012;
    c.transient = 10;
    c.seed = seed;
    return c;
}

DrcConfig drc_config(std::uint64_t seed, std::size_t period) {
    auto comp = [seed](double leak, std::size_t N, double gamma, double rho, double density, std::uint64_t id) {
        EsnConfig c;
        c.input_dim = 2;
        c.output_dim = 1;
        c.leaking_rate = leak;
        c.state_dim = N;
        c.regularization = gamma;
        c.spectral_radius = rho;
        c.density = density;
        c.transient = 10;
        c.seed = Rng::split(seed, id);
        return c;
    };
    DrcConfig d;
    d.period = period;
    d.trend = comp(0.58, 60, 0.011, 1.1, 0.016, 1);
    d.seasonal = comp(0.74, 20, 0.011, 0.32, 0.023, 2);
    d.residual = comp(0.91, 60, 7.24, 0.85, 0.022, 3);
    d.trend_members = 80;
    d.seasonal_members = 100;
    d.residual_members = 120;
    d.seasonal_phase_lookup = true;
    return d;
}

PairedMae seasonal_comparison(std::uint64_t seed) {
    const auto s = seasonal_benchmark(seed);
    const auto tr = static_cast<Eigen::Index>(s.train), te = static_cast<Eigen::Index>(s.test);
    const auto [lo, hi] = std::minmax_element(s.y.begin(), s.y.begin() + tr);
    const double mid = 0.5 * (*hi + *lo), half = 0.5 * (*hi - *lo);
    std::vector<double> z(s.y.size());
    for (std::size_t t = 0; t < z.size(); ++t) z[t] = (s.y[t] - mid) / half;
    const std::span<const double> actual(s.y.data() + tr, s.test);
    auto unscale = [&](std::vector<double> v) {
        for (auto& x : v) x = x * half + mid;
        return v;
    };

    const Mat<double> reg_train = s.regressors.topRows(tr), reg_test = s.regressors.bottomRows(te);
    PairedMae out;
    {
        const Mat<double> target = Eigen::Map<const Eigen::VectorXd>(z.data(), tr);
        const auto model = ensemble_train(srcrc_config(seed), 1, reg_train, target);
        const Mat<double> p = ensemble_forecast(model, &reg_test, s.test);
        out.srcrc = mae(unscale({p.data(), p.data() + p.size()}), actual);
    }
    {
        const auto model = drc_train(std::span<const double>(z.data(), s.train), reg_train, drc_config(seed, s.period));
        out.drc = mae(unscale(drc_predict(model, &reg_test, s.test)), actual);
    }
    return out;
}

// ------------------------------------------------- cross-correlation

std::vector<std::vector<double>> chain_series(std::size_t n, std::uint64_t seed) {
    Rng ra = Rng::stream(seed, 20), rb = Rng::stream(seed, 21), rc = Rng::stream(seed, 22);
    const auto a = white(n, ra), eb = white(n, rb), ec = white(n, rc);
    std::vector<double> b(n), c(n);
    for (std::size_t t = 0; t < n; ++t) {
        b[t] = (t >= 1 ? a[t - 1] : 0.0) + eb[t];
        c[t] = (t >= 2 ? eb[t - 2] : 0.0) + 0.5 * ec[t];
    }
    return {a, b, c};
}

bool is_planted_chain(const CcfNetwork& net) {
    if (net.edges.size() != 2) return false;
    const auto& e0 = net.edges[0];
    const auto& e1 = net.edges[1];
    return e0.src == 0 && e0.dst == 1 && e0.lags == std::vector<int>{1} && e1.src == 1 && e1.dst == 2 &&
           e1.lags == std::vector<int>{2};
}

LagShiftFixture lag_shift_fixture(std::uint64_t seed) {
    const std::size_t n = 500;
    LagShiftFixture f;
    Rng rx = Rng::stream(seed, 30), re = Rng::stream(seed, 31), rn = Rng::stream(seed, 32);
    const auto x = ar1(n, 0.5, rx);
    const auto e = white(n, re);
    f.target.resize(n);
    for (std::size_t t = 0; t < n; ++t) f.target[t] = (t >= 2 ? std::tanh(x[t - 2]) : 0.0) + 0.05 * e[t];
    f.candidates = {{"noise1", white(n, rn)}, {"x_lag2", delayed(x, 2)}, {"noise2", white(n, rn)}};
    f.planted = {1};
    EsnConfig& c = f.evaluator;
    c.state_dim = 60;
    c.spectral_radius = 0.5;
    c.density = 0.1;
    c.regularization = 1e-4;
    c.feedback_scale = 0.1;
    c.input_scale = 0.5;
    c.seed = Rng::split(seed, 33);
    return f;
}

// ------------------------------------------------------------- residuals

std::vector<double> skewed_residuals(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        if (rng.uniform() < 0.8)
            x = 0.1 * rng.normal();
        else
            x = -0.4 * std::log(1.0 - rng.uniform());
        x = -x;
    }
    return v;
}

// ------------------------------------------------------------- quantum

namespace {

RcPropagationConfig rc_settings(double rho, double leak, std::size_t tmin, double gamma, std::size_t N,
                                double density, std::uint64_t seed) {
    RcPropagationConfig r;
    r.esn.spectral_radius = rho;
    r.esn.leaking_rate = leak;
    r.esn.transient = tmin;
    r.esn.regularization = gamma;
    r.esn.state_dim = N;
    r.esn.density = density;
    r.esn.feedback_scale = 0.5;
    r.esn.seed = seed;
    r.train_steps = 5000;
    r.test_steps = 5000;
    r.multi_step = true;
    r.split_fraction = 0.85;
    return r;
}

} // namespace

std::vector<std::string> quantum_preset_names() { return {"ho1d", "morse", "quartic_poly", "ho2d"}; }

QuantumPreset quantum_preset(const std::string& name, std::uint64_t seed) {
    const double w = 1.0 / (2.0 * std::sqrt(2.0));
    QuantumPreset p;
    p.name = name;
    if (name == "ho1d") {
        const auto g = SpatialGrid::line(-10.0, 10.0, 200);
        p.potential = PotentialSpec::harmonic(1.0);
        p.psi0 = gaussian_wavepacket(g, 0.0, w, 3.35);
        p.dt = 0.002;
        p.steps = 10000;
        p.analytic = ho_levels_analytic(1.0, 40);
        p.rc = rc_settings(1.10, 0.015, 300, 0.1, 2500, 0.015, seed);
    } else if (name == "morse") {
        const auto g = SpatialGrid::line(-10.0, 25.0, 140);
        p.potential = PotentialSpec::morse(7.0, 0.09, 0.0);
        p.psi0 = gaussian_wavepacket(g, 0.0, w, 2.0);
        p.dt = 0.007;
        p.steps = 20000;
        p.window = Window::hann;
        p.prominence = 0.01;
        p.analytic = morse_levels_analytic(7.0, 0.09, 1000);
        p.rc = rc_settings(0.75, 0.015, 500, 0.5, 1500, 0.015, seed);
    } else if (name == "quartic_poly") {
        const auto g = SpatialGrid::line(-15.0, 25.0, 150);
        p.potential = PotentialSpec::quartic_poly({-0.5, 0.14, 0.09, -0.01, 0.001});
        p.psi0 = gaussian_wavepacket(g, 0.0, w, 2.0);
        p.dt = 0.007;
        p.steps = 20000;
        p.window = Window::hann;
        p.prominence = 0.01;
        p.rc = rc_settings(0.75, 0.017, 50, 0.05, 1500, 0.008, seed);
    } else if (name == "ho2d") {
        const auto g = SpatialGrid::plane({-6.0, 6.0, 60}, {-6.0, 6.0, 60});
        p.potential = PotentialSpec::harmonic2d(1.0, 2.0);
        p.psi0 = gaussian_wavepacket_2d(g, {0.0, 0.0}, {0.9, 0.9}, {1.75, -1.75});
        p.dt = 0.02;
        p.steps = 2000;
        p.window = Window::hann;
        p.prominence = 0.02;
        const std::vector<double> omegas{1.0, std::sqrt(2.0)};
        p.analytic = ho_levels_analytic(omegas, 12);
        p.rc = rc_settings(1.10, 0.06, 300, 0.5, 2000, 0.015, seed);
        p.rc.train_steps = 1000;
        p.rc.test_steps = 1000;
    } else {
        throw std::invalid_argument("unknown quantum system '" + name + "' (ho1d, morse, quartic_poly, ho2d)");
    }
    return p;
}

} // namespace rk::fixtures
