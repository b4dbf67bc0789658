// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
//
//   rk-acceptance [--only 1,2,...] [--rk <path to rk>] [--repo <dir>]

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <unistd.h>

#include "CLI11.hpp"
#include "rk/crosscorr.hpp"
#include "rk/fixtures.hpp"
#include "rk/intervals.hpp"
#include "rk/quantum.hpp"

namespace fs = std::filesystem;
using namespace rk;

namespace {

// Pinned tolerances and counts.
constexpr std::size_t kHoPeaks = 8;
constexpr std::size_t kMorseLevels = 14;
constexpr double kMorseTol = 1e-3;
constexpr double kMorseFirstLevel = -6.8326;
constexpr double kMorseSeconds = 60.0;
constexpr std::size_t kRcSeeds = 5, kRcNeeded = 4;
constexpr double kRcMseCap = 1e-3;
constexpr std::size_t kPeriodicSeeds = 10;
constexpr double kPeriodicMseCap = 0.01;
constexpr double kHeatImprovedCap = 1e-4;
constexpr double kHeatRatio = 10.0;
constexpr std::size_t kHeatSeeds = 3;
constexpr double kNigMassTol = 1e-6;
constexpr double kRoundTripTol = 1e-6;
constexpr double kCoverageTol = 0.05;
constexpr std::size_t kCoverageHeldOut = 20000;
constexpr std::size_t kDrcSeeds = 20, kDrcNeeded = 16;
constexpr std::size_t kChainSeeds = 100, kChainNeeded = 95, kChainLength = 1000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> oracle_peaks(const fixtures::QuantumPreset& p) {
    const auto traj = split_step_propagate(p.psi0, p.potential.sample(p.psi0.grid), p.dt, p.steps);
    return find_peaks(energy_spectrum(autocorrelation(traj, p.psi0), p.dt, p.window), p.prominence);
}

// ------------------------------------------------------------------ AC1

Outcome ac1() {
    const auto p = fixtures::quantum_preset("ho1d");
    const auto peaks = oracle_peaks(p);
    const double T = p.dt * static_cast<double>(p.steps), half = std::numbers::pi / T;
    double worst = 0.0;
    bool ok = peaks.size() == kHoPeaks;
    for (std::size_t i = 0; ok && i < peaks.size(); ++i) {
        worst = std::max(worst, std::abs(peaks[i] - (2.5 + static_cast<double>(i))));
        ok = worst <= half;
    }
    return {ok, fmt("%zu peaks (want %zu), max |E - (n+1/2)| = %.4g, bound pi/T = %.4g", peaks.size(), kHoPeaks,
                    worst, half)};
}

// ------------------------------------------------------------------ AC2

Outcome ac2() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto peaks = oracle_peaks(fixtures::quantum_preset("morse"));
    const double secs = seconds_since(t0);
    // E_n = -(a^2/2)(lambda - n - 1/2)^2 with lambda = sqrt(2 De) / a
    const double De = 7.0, a = 0.09, lambda = std::sqrt(2.0 * De) / a;
    double worst = 0.0;
    bool ok = peaks.size() >= kMorseLevels && std::abs(peaks[0] - kMorseFirstLevel) < 5e-5;
    for (std::size_t n = 0; n < kMorseLevels && n < peaks.size(); ++n) {
        const double e = -0.5 * a * a * std::pow(lambda - static_cast<double>(n) - 0.5, 2);
        worst = std::max(worst, std::abs(peaks[n] - e));
    }
    ok = ok && worst <= kMorseTol && secs < kMorseSeconds;
    return {ok, fmt("%zu peaks, first %.4f, max error over %zu levels %.3g (tol %.0e), %.2f s", peaks.size(),
                    peaks.empty() ? NAN : peaks[0], kMorseLevels, worst, kMorseTol, secs)};
}

// ------------------------------------------------------------------ AC3

Outcome ac3() {
    std::size_t good = 0;
    std::string per;
    for (std::uint64_t seed = 1; seed <= kRcSeeds; ++seed) {
        const auto p = fixtures::quantum_preset("ho1d", seed);
        auto cfg = p.rc;
        const auto traj = split_step_propagate(p.psi0, p.potential.sample(p.psi0.grid), p.dt,
                                               cfg.train_steps + cfg.test_steps);
        cfg.multi_step = false;
        const double standard = rc_propagate(traj, cfg).report.total_mse;
        cfg.multi_step = true;
        const double multi = rc_propagate(traj, cfg).report.total_mse;
        if (multi <= kRcMseCap && multi <= standard) ++good;
        per += fmt(" [seed %llu: multi %.3g std %.3g]", static_cast<unsigned long long>(seed), multi, standard);
    }
    return {good >= kRcNeeded, fmt("%zu/%zu seeds with multi <= %.0e and multi <= standard;", good, kRcSeeds,
                                   kRcMseCap) + per};
}

// ------------------------------------------------------------------ AC4

Outcome ac4() {
    using fixtures::ReservoirStyle;
    std::size_t wins = 0;
    std::vector<double> is_mse;
    for (std::uint64_t seed = 1; seed <= kPeriodicSeeds; ++seed) {
        const double is = fixtures::periodic_test_mse(ReservoirStyle::inhomogeneous_sparse, seed);
        const double id = fixtures::periodic_test_mse(ReservoirStyle::inhomogeneous_dense, seed);
        const double hs = fixtures::periodic_test_mse(ReservoirStyle::homogeneous_sparse, seed);
        const double hd = fixtures::periodic_test_mse(ReservoirStyle::homogeneous_dense, seed);
        if (is < id && is < hs && is < hd) ++wins;
        is_mse.push_back(is);
    }
    std::sort(is_mse.begin(), is_mse.end());
    const double median = 0.5 * (is_mse[4] + is_mse[5]);
    const bool ok = 2 * wins > kPeriodicSeeds && median <= kPeriodicMseCap;
    return {ok, fmt("inhomogeneous-sparse strictly lowest in %zu/%zu seeds (majority needed), median MSE %.3g "
                    "(cap %.2g)",
                    wins, kPeriodicSeeds, median, kPeriodicMseCap)};
}

// ------------------------------------------------------------------ AC5

Outcome ac5() {
    bool ok = true;
    std::string per;
    for (std::uint64_t seed = 1; seed <= kHeatSeeds; ++seed) {
        const auto improved = fixtures::heat_free_run(true, seed);
        const auto plain = fixtures::heat_free_run(false, seed);
        ok = ok && improved.test_mse <= kHeatImprovedCap && plain.test_mse >= kHeatRatio * improved.test_mse;
        per += fmt(" [seed %llu: improved %.3g, plain %s]", static_cast<unsigned long long>(seed), improved.test_mse,
                   plain.failed ? ("failed: " + plain.failure).c_str() : fmt("%.3g", plain.test_mse).c_str());
    }
    return {ok, fmt("improved <= %.0e and plain >= %.0fx improved;", kHeatImprovedCap, kHeatRatio) + per};
}

// ------------------------------------------------------------------ AC6

double mass(const NigParams& p) {
    boost::math::quadrature::exp_sinh<double> es;
    const double inf = std::numeric_limits<double>::infinity();
    return es.integrate([&](double u) { return nig_pdf(p.x0 + u, p); }, 0.0, inf) +
           es.integrate([&](double u) { return nig_pdf(p.x0 - u, p); }, 0.0, inf);
}

Outcome ac6() {
    std::vector<NigParams> sets = {
        {0.12, -0.048, 0.0069, 0.051}, {1.36, 0.22, -0.083, 0.20}, {1.66, -0.25, 0.056, 0.18},
        {0.31, -0.025, -0.0097, 0.084}, {2.68, 1.05, -0.11, 0.257}, {0.77, -0.14, 0.037, 0.11},
        {0.699, 0.074, 0.0013, 0.094}, {0.508, 0.192, -0.077, 0.093}, {1.174, 0.229, 0.0022, 0.11},
    };
    const auto residuals = fixtures::skewed_residuals(2000, 1);
    const auto fit = fit_class(residuals);
    sets.push_back(fit.nig.params);
    for (std::uint64_t seed = 2; seed <= 4; ++seed) sets.push_back(fit_nig(fixtures::skewed_residuals(500, seed)).params);

    double worst_mass = 0.0, worst_trip = 0.0;
    for (const auto& p : sets) {
        worst_mass = std::max(worst_mass, std::abs(mass(p) - 1.0));
        for (int k = 1; k <= 99; ++k) {
            const double prob = 0.01 * k;
            worst_trip = std::max(worst_trip, std::abs(nig_cdf(nig_quantile(prob, p), p) - prob));
        }
    }
    const bool ok = worst_mass <= kNigMassTol && worst_trip <= kRoundTripTol && fit.bic_nig < fit.bic_gauss;
    return {ok, fmt("%zu parameter sets: max |mass - 1| %.2g, max round trip %.2g; BIC NIG %.1f vs Gaussian %.1f",
                    sets.size(), worst_mass, worst_trip, fit.bic_nig, fit.bic_gauss)};
}

// ------------------------------------------------------------------ AC7

Outcome ac7() {
    // Calibration set with class-dependent residual shapes.
    Rng rng(701);
    const std::size_t n = 900;
    std::vector<double> prev(n), pred(n), actual(n);
    for (std::size_t t = 0; t < n; ++t) {
        pred[t] = 5.0 + rng.normal();
        prev[t] = pred[t] * (1.0 + 0.3 * rng.uniform(-1.0, 1.0));
        const auto cls = classify_tendency(prev[t], pred[t]);
        const double e = cls == Tendency::constant ? 0.05 * rng.normal()
                         : cls == Tendency::increase ? 0.2 * rng.normal() + 0.1
                                                     : 0.1 - 0.3 * std::log(1.0 - rng.uniform());
        actual[t] = pred[t] + e;
    }
    const auto model = fit_interval_model(prev, pred, actual);

    // Held-out data drawn from the fitted class distributions.
    Rng held(702);
    std::vector<double> hp(kCoverageHeldOut), hq(kCoverageHeldOut), ha(kCoverageHeldOut);
    for (std::size_t t = 0; t < kCoverageHeldOut; ++t) {
        hq[t] = 5.0 + held.normal();
        hp[t] = hq[t] * (1.0 + 0.3 * held.uniform(-1.0, 1.0));
        const auto& cf = model.fit(classify_tendency(hp[t], hq[t]));
        const double e = cf.chosen == Family::nig ? sample_nig(cf.nig.params, 1, held)[0]
                                                  : cf.gauss.params.mean + cf.gauss.params.sd * held.normal();
        ha[t] = hq[t] + e;
    }
    const std::vector<double> levels{0.6, 0.7, 0.8, 0.9};
    const auto set = predict_intervals(model, hp, hq, levels);
    bool ok = true;
    double last_piaw = -1.0;
    std::string per;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        const auto m = interval_metrics(set.bounds[k], ha, levels[k]);
        ok = ok && std::abs(m.picp - levels[k]) <= kCoverageTol && m.piaw > last_piaw;
        last_piaw = m.piaw;
        per += fmt(" [PINC %.1f: PICP %.4f PIAW %.4f]", levels[k], m.picp, m.piaw);
    }
    return {ok, fmt("held-out n = %zu, PICP within +-%.2f, PIAW strictly increasing;", kCoverageHeldOut,
                    kCoverageTol) + per};
}

// ------------------------------------------------------------------ AC8

Outcome ac8() {
    std::size_t wins = 0;
    double srcrc_sum = 0.0, drc_sum = 0.0;
    for (std::uint64_t seed = 1; seed <= kDrcSeeds; ++seed) {
        const auto m = fixtures::seasonal_comparison(seed);
        wins += m.drc < m.srcrc;
        srcrc_sum += m.srcrc;
        drc_sum += m.drc;
    }
    return {wins >= kDrcNeeded, fmt("D-RC below S-RC in %zu/%zu seeds (need %zu); mean MAE D-RC %.4f, S-RC %.4f",
                                    wins, kDrcSeeds, kDrcNeeded, drc_sum / kDrcSeeds, srcrc_sum / kDrcSeeds)};
}

// ------------------------------------------------------------------ AC9

Outcome ac9() {
    std::size_t exact = 0;
    for (std::uint64_t seed = 1; seed <= kChainSeeds; ++seed) {
        const auto net = build_network({"A", "B", "C"}, fixtures::chain_series(kChainLength, seed),
                                       fixtures::kChainMaxLag, fixtures::kChainZ, 8);
        exact += fixtures::is_planted_chain(net);
    }
    const auto f = fixtures::lag_shift_fixture(1);
    const auto r = select_subset(f.candidates.size(),
                                 esn_subset_evaluator(f.evaluator, f.members, f.target, f.candidates, f.train));
    const bool ok = exact >= kChainNeeded && r.subset == f.planted;
    std::string chosen;
    for (auto i : r.subset) chosen += (chosen.empty() ? "" : ",") + f.candidates[i].name;
    return {ok, fmt("exact chain network in %zu/%zu seeds (need %zu); lag-shift subset {%s}", exact, kChainSeeds,
                    kChainNeeded, chosen.c_str())};
}

// ----------------------------------------------------------------- AC10

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Manifest without its wall-time field.
std::string manifest_sans_runtime(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line, out;
    while (std::getline(in, line))
        if (line.find("\"runtime_s\"") == std::string::npos) out += line + "\n";
    return out;
}

Outcome ac10(const fs::path& rk_bin, const fs::path& repo) {
    const std::vector<std::pair<std::string, std::string>> runs{
        {"forecast", "drc_seasonal"},  {"forecast", "srcrc_seasonal"},   {"forecast", "ngrc_sin7"},
        {"intervals", "drc_seasonal"}, {"ccf", "ccf_chain"},             {"ccf", "ccf_lagshift"},
        {"quantum", "quantum_ho1d"},   {"quantum", "quantum_morse"},     {"quantum", "quantum_quartic_poly"},
        {"quantum", "quantum_ho2d"},   {"quantum", "quantum_ho1d_rc"}};
    const fs::path root = fs::temp_directory_path() / ("rk_acceptance_" + std::to_string(::getpid()));
    std::size_t identical = 0, files = 0;
    std::string bad;
    for (const auto& [cmd, cfg] : runs) {
        bool same = true;
        for (const char* r : {"a", "b"}) {
            const fs::path out = root / (cmd + "_" + cfg) / r;
            const std::string line = rk_bin.string() + " " + cmd + " --config " +
                                     (repo / "configs" / (cfg + ".toml")).string() + " --out " + out.string() +
                                     " >/dev/null 2>&1";
            const int status = std::system(line.c_str());
            same = same && WIFEXITED(status) && WEXITSTATUS(status) == 0;
        }
        const fs::path a = root / (cmd + "_" + cfg) / "a", b = root / (cmd + "_" + cfg) / "b";
        if (same)
            for (const auto& e : fs::directory_iterator(a)) {
                const auto name = e.path().filename();
                ++files;
                same = same && (name == "manifest.json"
                                    ? manifest_sans_runtime(e.path()) == manifest_sans_runtime(b / name)
                                    : slurp(e.path()) == slurp(b / name));
            }
        if (same)
            ++identical;
        else
            bad += " " + cmd + ":" + cfg;
    }
    fs::remove_all(root);
    return {identical == runs.size(), fmt("%zu/%zu command runs byte-identical over %zu artifacts", identical,
                                          runs.size(), files) + (bad.empty() ? "" : "; differing:" + bad)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only;
    fs::path rk_bin = fs::path(argv[0]).parent_path() / "rk";
    fs::path repo = RK_SOURCE_DIR;
    app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
    app.add_option("--rk", rk_bin, "path of the rk binary");
    app.add_option("--repo", repo, "repository root holding configs/ and data/");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Outcome()>> criteria{
        ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, [&] { return ac10(rk_bin, repo); }};
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::printf("AC%d %s  %s  (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}
