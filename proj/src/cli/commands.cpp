#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rk/cli.hpp"
#include "rk/errors.hpp"
#include "rk/fixtures.hpp"
#include "rk/metrics.hpp"

namespace rk::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

fs::path resolve(const RunConfig& c, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || c.base_dir.empty() ? path : c.base_dir / path;
}

class Writer {
public:
    explicit Writer(Artifacts& a) : a_(a) { fs::create_directories(a.out_dir); }

    void text(const std::string& name, const std::string& body) {
        std::ofstream out(a_.out_dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (a_.out_dir / name).string());
        out << body;
        if (!out) throw std::runtime_error("write failed for " + (a_.out_dir / name).string());
        a_.files.push_back(name);
    }
    void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
    void trajectory(const std::string& name, const Trajectory& t) {
        write_trajectory((a_.out_dir / name).string(), t);
        a_.files.push_back(name);
    }

private:
    Artifacts& a_;
};

// ------------------------------------------------------------- forecast

struct SplitRange {
    const char* name;
    std::size_t begin, end;
};

json split_metrics(const std::vector<double>& pred, const std::vector<double>& actual, SplitRange r,
                   double threshold) {
    std::vector<double> p, a;
    for (std::size_t t = r.begin; t < r.end; ++t)
        if (!std::isnan(pred[t])) {
            p.push_back(pred[t]);
            a.push_back(actual[t]);
        }
    json j{{"rows", p.size()}};
    if (p.empty()) {
        j["mae"] = nullptr;
        j["mda"] = nullptr;
        return j;
    }
    j["mae"] = mae(p, a);
    // Direction baseline is the actual value just before each predicted row.
    std::vector<double> pe{0.0}, ae;
    std::size_t first = r.begin;
    while (std::isnan(pred[first])) ++first;
    if (first == 0) {
        ae.push_back(actual[0]);
        for (std::size_t t = 1; t < r.end; ++t) {
            pe.push_back(pred[t]);
            ae.push_back(actual[t]);
        }
    } else {
        ae.push_back(actual[first - 1]);
        for (std::size_t t = first; t < r.end; ++t) {
            pe.push_back(pred[t]);
            ae.push_back(actual[t]);
        }
    }
    j["mda"] = pe.size() >= 2 ? json(mda(pe, ae, MdaConfig{threshold})) : json(nullptr);
    return j;
}

// Scaled predictions for every row; rows without one hold NaN.
std::vector<double> predict(const RunConfig& c, const SeriesBundle& b) {
    const std::size_t n = b.size(), T = c.splits.train, H = n - T;
    const auto Ti = static_cast<Eigen::Index>(T), Hi = static_cast<Eigen::Index>(H);
    const std::vector<double> z = b.scaled_target();
    const Mat<double> R = b.scaled_regressors();
    const std::size_t K = b.regressors.size();
    std::vector<double> pred(n, kNaN);
    const auto& m = c.model;

    if (m.name == "srcrc" || m.name == "erc") {
        EsnConfig e = m.esn;
        e.input_dim = K;
        e.output_dim = 1;
        if (T <= e.transient) throw ConfigError("splits.train: must exceed model.esn.transient");
        const Mat<double> targets = Eigen::Map<const Eigen::VectorXd>(z.data(), Ti);
        const Mat<double> inputs = K > 0 ? Mat<double>(R.topRows(Ti)) : constant_inputs<double>(e, T);
        const auto model = ensemble_train(e, m.members, inputs, targets);
        for (std::size_t t = e.transient; t < T; ++t) pred[t] = model.fitted(static_cast<Eigen::Index>(t), 0);
        const Mat<double> future = K > 0 ? Mat<double>(R.bottomRows(Hi)) : constant_inputs<double>(e, H);
        Mat<double> p;
        if (m.mode == "free_run") {
            p = ensemble_forecast(model, K > 0 ? &future : nullptr, H);
        } else {
            const Mat<double> truth = Eigen::Map<const Eigen::VectorXd>(z.data() + T, Hi);
            p = ensemble_one_step(model, future, truth);
        }
        for (std::size_t h = 0; h < H; ++h) pred[T + h] = p(static_cast<Eigen::Index>(h), 0);
    } else if (m.name == "drc") {
        if (m.mode != "free_run")
            throw ConfigError("model.mode: drc forecasts by free run only (its components are not observed ahead)");
        DrcConfig d = m.drc;
        for (EsnConfig* e : {&d.trend, &d.seasonal, &d.residual}) {
            e->input_dim = K;
            e->output_dim = 1;
            if (T <= e->transient) throw ConfigError("splits.train: must exceed the component transients");
        }
        if (T < 2 * d.period) throw ConfigError("splits.train: decomposition needs at least two periods");
        const auto model = drc_train(std::span<const double>(z.data(), T), R.topRows(Ti), d);
        const auto fitted = model.fitted();
        const std::size_t first = std::max({d.trend.transient, d.seasonal.transient, d.residual.transient});
        for (std::size_t t = first; t < T; ++t) pred[t] = fitted[t];
        const Mat<double> future = R.bottomRows(Hi);
        const auto p = drc_predict(model, &future, H);
        for (std::size_t h = 0; h < H; ++h) pred[T + h] = p[h];
    } else {
        const std::size_t k = m.ngrc.delay_depth;
        if (T < k + 3) throw ConfigError("splits.train: too short for model.ngrc.delay_depth");
        const auto model = ngrc_train(std::span<const double>(z.data(), T), m.ngrc);
        const auto fit = ngrc_one_step(model, std::span<const double>(z.data(), T), k + 1);
        for (std::size_t t = k + 1; t < T; ++t) pred[t] = fit[t - k - 1];
        const auto p = m.mode == "free_run" ? ngrc_forecast(model, H) : ngrc_one_step(model, z, T);
        for (std::size_t h = 0; h < H; ++h) pred[T + h] = p[h];
    }
    return pred;
}

std::string tendency_name(Tendency t) { return to_string(t); }

json class_fit_json(const ClassFit& f) {
    const auto& p = f.nig.params;
    return {{"samples", f.samples},
            {"pooled", f.pooled},
            {"chosen", f.chosen == Family::nig ? "nig" : "gaussian"},
            {"bic_nig", f.bic_nig},
            {"bic_gaussian", f.bic_gauss},
            {"nig", {{"a", p.a}, {"b", p.b}, {"x0", p.x0}, {"sigma", p.sigma}}},
            {"gaussian", {{"mean", f.gauss.params.mean}, {"sd", f.gauss.params.sd}}}};
}

} // namespace

void run_forecast(const RunConfig& c, Artifacts& out, bool with_intervals) {
    if (c.data.path.empty()) throw ConfigError("data.path: is required");
    const SeriesBundle b = ingest_csv(resolve(c, c.data.path), c.data.schema);
    const std::size_t n = b.size(), T = c.splits.train, V = c.splits.validation;
    if (T == 0) throw ConfigError("splits.train: is required");
    if (T + V >= n)
        throw ConfigError("splits: train + validation (" + std::to_string(T + V) + ") must leave test rows out of " +
                          std::to_string(n));
    if (with_intervals && V < kMinClassSamples)
        throw ConfigError("splits.validation: interval fitting needs at least " + std::to_string(kMinClassSamples) +
                          " validation rows");

    const auto scaled = predict(c, b);
    std::vector<double> pred(n);
    for (std::size_t t = 0; t < n; ++t)
        pred[t] = std::isnan(scaled[t]) ? kNaN : b.target_scaling.unscale(scaled[t]);
    for (double p : pred)
        if (std::isinf(p)) throw NumericalError("forecast: non-finite prediction");

    const SplitRange splits[3] = {{"train", 0, T}, {"validation", T, T + V}, {"test", T + V, n}};
    Writer w(out);
    std::ostringstream csv;
    csv << "date,split,actual,predicted\n";
    for (const auto& s : splits)
        for (std::size_t t = s.begin; t < s.end; ++t)
            csv << b.timestamps[t] << ',' << s.name << ',' << num(b.target[t]) << ',' << num(pred[t]) << '\n';
    w.text("predictions.csv", csv.str());

    json metrics{{"model", c.model.name}, {"mode", c.model.mode}, {"dropped_rows", b.dropped_rows}};
    for (const auto& s : splits) metrics[s.name] = split_metrics(pred, b.target, s, c.data.mda_threshold);
    w.json_file("metrics.json", metrics);

    if (!(with_intervals || c.intervals.enabled)) return;
    if (V < kMinClassSamples)
        throw ConfigError("splits.validation: interval fitting needs at least " + std::to_string(kMinClassSamples) +
                          " validation rows");
    std::vector<double> vprev, vpred, vact, tprev, tpred, tact;
    for (std::size_t t = T; t < T + V; ++t) {
        vprev.push_back(b.target[t - 1]);
        vpred.push_back(pred[t]);
        vact.push_back(b.target[t]);
    }
    for (std::size_t t = T + V; t < n; ++t) {
        tprev.push_back(b.target[t - 1]);
        tpred.push_back(pred[t]);
        tact.push_back(b.target[t]);
    }
    const auto model = fit_interval_model(vprev, vpred, vact, c.intervals.threshold);
    const auto set = predict_intervals(model, tprev, tpred, c.intervals.pinc, c.intervals.family);

    std::ostringstream icsv;
    icsv << "date,tendency,actual,predicted";
    for (double p : c.intervals.pinc) icsv << ",lower_" << short_num(p) << ",upper_" << short_num(p);
    icsv << '\n';
    for (std::size_t i = 0; i < tpred.size(); ++i) {
        icsv << b.timestamps[T + V + i] << ',' << tendency_name(set.classes[i]) << ',' << num(tact[i]) << ','
             << num(tpred[i]);
        for (std::size_t k = 0; k < set.pinc.size(); ++k)
            icsv << ',' << num(set.bounds[k][i].lower) << ',' << num(set.bounds[k][i].upper);
        icsv << '\n';
    }
    w.text("intervals.csv", icsv.str());

    json levels = json::array();
    for (std::size_t k = 0; k < set.pinc.size(); ++k) {
        const auto m = interval_metrics(set.bounds[k], tact, set.pinc[k]);
        levels.push_back({{"pinc", set.pinc[k]}, {"picp", m.picp}, {"ace", m.ace}, {"piaw", m.piaw}});
    }
    json classes;
    for (Tendency t : {Tendency::increase, Tendency::decrease, Tendency::constant})
        classes[tendency_name(t)] = class_fit_json(model.fit(t));
    w.json_file("interval_metrics.json", {{"threshold", c.intervals.threshold},
                                          {"fitted_on", "validation"},
                                          {"evaluated_on", "test"},
                                          {"classes", classes},
                                          {"pooled", class_fit_json(model.pooled)},
                                          {"levels", levels}});
}

// ------------------------------------------------------------------ ccf

void run_ccf(const RunConfig& c, Artifacts& out) {
    const auto& cc = c.ccf;
    if (cc.series.size() < 2) throw ConfigError("ccf.series: needs at least two series");
    std::vector<std::string> names;
    std::vector<std::vector<double>> raw, scaled;
    std::vector<Scaling> scalings;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < cc.series.size(); ++i) {
        const auto& s = cc.series[i];
        if (!seen.insert(s.name).second) throw ConfigError("ccf.series[" + std::to_string(i) + "].name: duplicate");
        CsvSchema schema;
        schema.date_column = cc.date_column;
        schema.target = s.column;
        schema.min_rows = cc.min_rows;
        const auto b = ingest_csv(resolve(c, s.path), schema);
        if (!raw.empty() && b.size() != raw.front().size())
            throw ConfigError("ccf.series[" + std::to_string(i) + "]: " + std::to_string(b.size()) +
                              " rows, the first series has " + std::to_string(raw.front().size()));
        names.push_back(s.name);
        raw.push_back(b.target);
        scaled.push_back(b.scaled_target());
        scalings.push_back(b.target_scaling);
    }
    if (static_cast<std::size_t>(cc.max_lag) + 2 >= raw.front().size())
        throw ConfigError("ccf.max_lag: too large for series of length " + std::to_string(raw.front().size()));

    Writer w(out);
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = 0; j < names.size(); ++j) {
            if (i == j) continue;
            const auto r = ccf(raw[i], raw[j], cc.max_lag);
            const auto pw = prewhiten(raw[i], raw[j], cc.ar_order);
            const auto p = ccf(pw.x_resid, pw.y_filtered, cc.max_lag);
            std::ostringstream a, b;
            a << "lag,ccf\n";
            b << "lag,ccf\n";
            for (int h = -cc.max_lag; h <= cc.max_lag; ++h) {
                a << h << ',' << num(r.at(h)) << '\n';
                b << h << ',' << num(p.at(h)) << '\n';
            }
            w.text("ccf_raw_" + names[i] + "_" + names[j] + ".csv", a.str());
            w.text("ccf_prewhitened_" + names[i] + "_" + names[j] + ".csv", b.str());
        }
    const auto net = build_network(names, raw, cc.max_lag, cc.z, cc.ar_order);
    auto netj = json::parse(network_to_json(net));
    json contemporaneous = json::array();
    for (const auto& [a, b] : net.contemporaneous) contemporaneous.push_back({names[a], names[b]});
    netj["contemporaneous"] = contemporaneous;
    netj["z"] = cc.z;
    netj["max_lag"] = cc.max_lag;
    w.json_file("network.json", netj);

    if (cc.select_targets.empty()) return;
    const std::size_t n = raw.front().size();
    const std::size_t train = cc.select_train ? cc.select_train : (7 * n) / 10;
    json sel = json::array();
    for (const auto& target : cc.select_targets) {
        const auto it = std::find(names.begin(), names.end(), target);
        if (it == names.end()) throw ConfigError("ccf.select_targets: '" + target + "' is not a series name");
        const auto ti = static_cast<std::size_t>(it - names.begin());
        std::vector<Candidate> cands;
        for (const auto& e : net.edges)
            if (e.dst == ti)
                for (int lag : e.lags)
                    cands.push_back({names[e.src] + "_lag" + std::to_string(lag),
                                     delayed(scaled[e.src], static_cast<std::size_t>(lag))});
        const auto mode = cands.size() <= kMaxExhaustiveCandidates ? SubsetSearch::exhaustive : SubsetSearch::greedy;
        EsnConfig ev = cc.evaluator;
        ev.seed = Rng::split(ev.seed, ti);
        const auto eval = esn_subset_evaluator(ev, cc.members, scaled[ti], cands, train);
        const auto r = select_subset(cands.size(), eval, mode);
        const double unit = 0.5 * (scalings[ti].max - scalings[ti].min);
        json cn = json::array(), chosen = json::array();
        for (const auto& cd : cands) cn.push_back(cd.name);
        for (auto k : r.subset) chosen.push_back(cands[k].name);
        sel.push_back({{"target", target},
                       {"candidates", cn},
                       {"chosen", chosen},
                       {"validation_mae", r.score * unit},
                       {"baseline_mae", r.baseline * unit},
                       {"evaluated", r.evaluated},
                       {"search", mode == SubsetSearch::exhaustive ? "exhaustive" : "greedy"},
                       {"train_rows", train}});
    }
    w.json_file("selection.json", {{"selections", sel}});
}

// -------------------------------------------------------------- quantum

namespace {

double intensity_at(const Spectrum& s, double e) {
    const auto it = std::lower_bound(s.energy.begin(), s.energy.end(), e);
    std::size_t i = static_cast<std::size_t>(it - s.energy.begin());
    if (i == s.energy.size()) i = s.energy.size() - 1;
    if (i > 0 && std::abs(s.energy[i - 1] - e) < std::abs(s.energy[i] - e)) --i;
    return s.intensity[i];
}

std::string peaks_csv(const Spectrum& s, const std::vector<double>& peaks) {
    std::ostringstream os;
    os << "index,energy,intensity\n";
    for (std::size_t i = 0; i < peaks.size(); ++i) os << i << ',' << num(peaks[i]) << ',' << num(intensity_at(s, peaks[i])) << '\n';
    return os.str();
}

std::string spectrum_csv(const Spectrum& s) {
    std::ostringstream os;
    write_spectrum_csv(os, s);
    return os.str();
}

std::string eigenfunction_csv(const Wavefunction& w) {
    std::ostringstream os;
    const auto& g = w.grid;
    if (g.dim() == 1) {
        os << "x,re,im\n";
        for (std::size_t i = 0; i < g.size(); ++i)
            os << num(g.axes[0].coord(i)) << ',' << num(w.psi[static_cast<Eigen::Index>(i)].real()) << ','
               << num(w.psi[static_cast<Eigen::Index>(i)].imag()) << '\n';
    } else {
        os << "x,y,re,im\n";
        const std::size_t ny = g.axes[1].points;
        for (std::size_t i = 0; i < g.size(); ++i)
            os << num(g.axes[0].coord(i / ny)) << ',' << num(g.axes[1].coord(i % ny)) << ','
               << num(w.psi[static_cast<Eigen::Index>(i)].real()) << ','
               << num(w.psi[static_cast<Eigen::Index>(i)].imag()) << '\n';
    }
    return os.str();
}

json level_table(const std::vector<double>& peaks, const Spectrum& s, const std::vector<double>& analytic) {
    json rows = json::array();
    double worst = 0.0;
    for (double e : peaks) {
        json r{{"energy", e}, {"intensity", intensity_at(s, e)}};
        if (!analytic.empty()) {
            const auto it = std::min_element(analytic.begin(), analytic.end(),
                                             [e](double a, double b) { return std::abs(a - e) < std::abs(b - e); });
            r["analytic"] = *it;
            r["level"] = it - analytic.begin();
            r["error"] = e - *it;
            worst = std::max(worst, std::abs(e - *it));
        }
        rows.push_back(r);
    }
    json j{{"peaks", rows}, {"resolution", s.resolution}};
    j["max_abs_error"] = analytic.empty() ? json(nullptr) : json(worst);
    return j;
}

} // namespace

void run_quantum(const RunConfig& c, Artifacts& out) {
    const auto& q = c.quantum;
    auto preset = fixtures::quantum_preset(q.system, c.seed);
    if (q.steps) preset.steps = *q.steps;
    if (q.dt) preset.dt = *q.dt;
    if (q.window) preset.window = *q.window;
    if (q.prominence) preset.prominence = *q.prominence;
    auto& rc = preset.rc;
    if (q.train_steps) rc.train_steps = *q.train_steps;
    if (q.test_steps) rc.test_steps = *q.test_steps;
    if (q.multi_step) rc.multi_step = *q.multi_step;
    if (q.state_dim) rc.esn.state_dim = *q.state_dim;
    const bool with_rc = q.mode == "rc";
    if (with_rc && rc.train_steps == 0) throw ConfigError("quantum.rc.train_steps: must be positive in rc mode");
    if (preset.steps < kMinSpectrumSamples)
        throw ConfigError("quantum.steps: need at least " + std::to_string(kMinSpectrumSamples));
    const std::size_t steps = with_rc ? std::max(preset.steps, rc.train_steps + rc.test_steps) : preset.steps;

    const Eigen::VectorXd V = preset.potential.sample(preset.psi0.grid);
    try {
        check_momentum_resolution(preset.psi0);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("quantum: ") + e.what());
    }
    const Trajectory traj = split_step_propagate(preset.psi0, V, preset.dt, steps);
    Trajectory oracle = traj;
    oracle.frames.resize(preset.steps + 1);

    Writer w(out);
    w.trajectory("trajectory.bin", traj);
    const auto spec = energy_spectrum(autocorrelation(oracle, preset.psi0), oracle.dt, preset.window);
    w.text("spectrum.csv", spectrum_csv(spec));
    const auto peaks = find_peaks(spec, preset.prominence);
    w.text("peaks.csv", peaks_csv(spec, peaks));

    json eig = json::array();
    for (std::size_t i = 0; i < std::min(q.eigenfunctions, peaks.size()); ++i) {
        try {
            const auto phi = extract_eigenfunction(oracle, peaks[i], preset.window);
            const std::string name = "eigenfunction_" + std::to_string(i) + ".csv";
            w.text(name, eigenfunction_csv(phi));
            eig.push_back({{"file", name}, {"energy", peaks[i]}, {"residual", stationarity_residual(phi, V, peaks[i])}});
        } catch (const NumericalError& e) {
            eig.push_back({{"file", nullptr}, {"energy", peaks[i]}, {"skipped", e.what()}});
        }
    }
    json levels = level_table(peaks, spec, preset.analytic);
    levels["system"] = preset.name;
    levels["dt"] = oracle.dt;
    levels["steps"] = oracle.steps();
    levels["window"] = preset.window == Window::hann ? "hann" : "rectangular";
    levels["prominence"] = preset.prominence;
    levels["eigenfunctions"] = eig;
    w.json_file("levels.json", levels);

    if (!with_rc) return;
    const auto r = rc_propagate(traj, rc);
    w.trajectory("rc_trajectory.bin", r.predicted);
    Trajectory rc_oracle = r.predicted;
    const auto rc_spec = energy_spectrum(autocorrelation(rc_oracle, preset.psi0), rc_oracle.dt, preset.window);
    w.text("rc_spectrum.csv", spectrum_csv(rc_spec));
    const auto rc_peaks = find_peaks(rc_spec, preset.prominence);
    w.text("rc_peaks.csv", peaks_csv(rc_spec, rc_peaks));
    json rep{{"model", rc.multi_step ? "multi_step" : "standard"},
             {"train_steps", r.report.train_steps},
             {"test_steps", r.report.test_steps},
             {"train_mse", r.report.train_mse},
             {"test_mse", r.report.test_mse},
             {"total_mse", r.report.total_mse},
             {"levels", level_table(rc_peaks, rc_spec, preset.analytic)}};
    w.json_file("rc_report.json", rep);
}

// ------------------------------------------------------------- manifest

void write_manifest(const std::string& command, const RunConfig& c, const Artifacts& a, double runtime_s) {
    json files = json::array();
    for (const auto& f : a.files)
        files.push_back({{"path", f}, {"sha256", sha256_file(a.out_dir / f)}, {"bytes", fs::file_size(a.out_dir / f)}});
    const json m{{"command", command},       {"config_hash", config_hash(c)}, {"seed", c.seed},
                 {"version", kVersion},      {"outputs", files},               {"runtime_s", runtime_s}};
    std::ofstream out(a.out_dir / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest.json");
}

} // namespace rk::cli
