#include "rk/crosscorr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/QR>
#include "json.hpp"

#include "rk/errors.hpp"
#include "rk/metrics.hpp"
#include "rk/variants.hpp"

namespace rk {

namespace {

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

void require_finite(std::span<const double> v, const char* who) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(who) + ": non-finite value");
}

std::vector<double> filter_with(std::span<const double> phi, double mean, std::span<const double> s) {
    const std::size_t p = phi.size();
    if (s.size() <= p) throw std::invalid_argument("ar_filter: series shorter than the model order");
    std::vector<double> out(s.size() - p);
    for (std::size_t t = p; t < s.size(); ++t) {
        double e = s[t] - mean;
        for (std::size_t i = 0; i < p; ++i) e -= phi[i] * (s[t - 1 - i] - mean);
        out[t - p] = e;
    }
    return out;
}

struct LsFit {
    Eigen::VectorXd coef;
    double rss = 0.0;
};

// Regress z[t] on z[t-1..t-p] for t in [first, n).
LsFit lagged_ls(const std::vector<double>& z, std::size_t p, std::size_t first) {
    const std::size_t rows = z.size() - first;
    LsFit f;
    if (p == 0) {
        for (std::size_t t = first; t < z.size(); ++t) f.rss += z[t] * z[t];
        return f;
    }
    Eigen::MatrixXd X(rows, p);
    Eigen::VectorXd y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = first + r;
        y(r) = z[t];
        for (std::size_t i = 0; i < p; ++i) X(r, i) = z[t - 1 - i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(p))
        throw NumericalError("ar_fit: lag matrix is rank deficient at order " + std::to_string(p));
    f.coef = qr.solve(y);
    f.rss = (y - X * f.coef).squaredNorm();
    return f;
}

} // namespace

LagCorrelation ccf(std::span<const double> x, std::span<const double> y, int max_lag) {
    if (x.size() != y.size()) throw std::invalid_argument("ccf: series lengths differ");
    if (max_lag < 0) throw std::invalid_argument("ccf: max_lag must be non-negative");
    const std::size_t n = x.size();
    if (n <= static_cast<std::size_t>(max_lag) + 2) throw std::invalid_argument("ccf: series too short for max_lag");
    require_finite(x, "ccf");
    require_finite(y, "ccf");
    const double mx = mean_of(x), my = mean_of(y);

    LagCorrelation out;
    out.max_lag = max_lag;
    out.n = n;
    out.values.resize(2 * static_cast<std::size_t>(max_lag) + 1);
    for (int h = -max_lag; h <= max_lag; ++h) {
        // pairs (x[t+h], y[t]) with both indices in range
        const std::size_t t0 = h < 0 ? static_cast<std::size_t>(-h) : 0;
        const std::size_t t1 = h > 0 ? n - static_cast<std::size_t>(h) : n;
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t t = t0; t < t1; ++t) {
            const double dx = x[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(t) + h)] - mx;
            const double dy = y[t] - my;
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("ccf: zero-variance series");
        out.values[static_cast<std::size_t>(h + max_lag)] = sxy / std::sqrt(sxx * syy);
    }
    return out;
}

ArModel ar_fit(std::span<const double> x, std::size_t max_order) {
    const std::size_t n = x.size();
    if (n <= 3 * max_order || n < 3) throw std::invalid_argument("ar_fit: needs more than 3 * max_order samples");
    require_finite(x, "ar_fit");
    ArModel m;
    m.mean = mean_of(x);
    std::vector<double> z(n);
    double var = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        z[t] = x[t] - m.mean;
        var += z[t] * z[t];
    }
    const double scale = std::max(std::abs(m.mean), 1e-300);
    if (var <= static_cast<double>(n) * (1e-13 * scale) * (1e-13 * scale))
        throw std::invalid_argument("ar_fit: zero-variance series");

    const double n_eff = static_cast<double>(n - max_order);
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p <= max_order; ++p) {
        const LsFit f = lagged_ls(z, p, max_order);
        const double s2 = f.rss / n_eff;
        const double bic = n_eff * std::log(s2) + static_cast<double>(p) * std::log(n_eff);
        if (bic < best_bic) {
            best_bic = bic;
            m.order = p;
        }
    }
    const LsFit f = lagged_ls(z, m.order, m.order);
    m.phi.assign(f.coef.data(), f.coef.data() + f.coef.size());
    m.bic = best_bic;
    m.residuals = filter_with(m.phi, m.mean, x);
    m.sigma2 = f.rss / static_cast<double>(n - m.order);
    return m;
}

std::vector<double> ar_filter(const ArModel& model, std::span<const double> series) {
    return filter_with(model.phi, model.mean, series);
}

Prewhitened prewhiten(std::span<const double> x, std::span<const double> y, std::size_t max_order) {
    if (x.size() != y.size()) throw std::invalid_argument("prewhiten: series lengths differ");
    require_finite(y, "prewhiten");
    Prewhitened p;
    p.model = ar_fit(x, max_order);
    p.x_resid = p.model.residuals;
    p.y_filtered = filter_with(p.model.phi, mean_of(y), y);
    return p;
}

std::vector<int> significant_lags(const LagCorrelation& c, double z) {
    if (c.n == 0) throw std::invalid_argument("significant_lags: sample count unknown");
    const double bound = z / std::sqrt(static_cast<double>(c.n));
    std::vector<int> out;
    for (int h = -c.max_lag; h <= c.max_lag; ++h)
        if (std::abs(c.at(h)) > bound) out.push_back(h);
    return out;
}

CcfNetwork build_network(const std::vector<std::string>& names, const std::vector<std::vector<double>>& series,
                         int max_lag, double z, std::size_t ar_order) {
    if (series.size() < 2) throw std::invalid_argument("build_network: needs at least two series");
    if (names.size() != series.size()) throw std::invalid_argument("build_network: names and series differ in count");
    CcfNetwork net;
    net.nodes = names;
    for (std::size_t i = 0; i < series.size(); ++i) {
        for (std::size_t j = 0; j < series.size(); ++j) {
            if (i == j) continue;
            const Prewhitened pw = prewhiten(series[i], series[j], ar_order);
            const LagCorrelation c = ccf(pw.x_resid, pw.y_filtered, max_lag);
            CcfEdge e{i, j, {}};
            for (int h : significant_lags(c, z)) {
                if (h < 0) e.lags.push_back(-h);
                if (h == 0) net.contemporaneous.emplace_back(i, j);
            }
            if (!e.lags.empty()) {
                std::sort(e.lags.begin(), e.lags.end());
                net.edges.push_back(std::move(e));
            }
        }
    }
    return net;
}

std::string network_to_json(const CcfNetwork& net) {
    nlohmann::json j;
    j["nodes"] = net.nodes;
    j["edges"] = nlohmann::json::array();
    for (const auto& e : net.edges)
        j["edges"].push_back({{"src", net.nodes.at(e.src)}, {"dst", net.nodes.at(e.dst)}, {"lags", e.lags}});
    return j.dump(2);
}

std::vector<double> delayed(std::span<const double> series, std::size_t lag) {
    if (series.empty()) throw std::invalid_argument("delayed: empty series");
    std::vector<double> out(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) out[t] = t >= lag ? series[t - lag] : series[0];
    return out;
}

SubsetResult select_subset(std::size_t c, const SubsetEvaluator& eval, SubsetSearch mode) {
    SubsetResult best;
    best.baseline = eval({});
    best.score = best.baseline;
    best.evaluated = 1;

    auto better = [](double s, const std::vector<std::size_t>& sub, double bs, const std::vector<std::size_t>& bsub) {
        if (s != bs) return s < bs;
        if (sub.size() != bsub.size()) return sub.size() < bsub.size();
        return sub < bsub;
    };

    if (mode == SubsetSearch::exhaustive) {
        if (c > kMaxExhaustiveCandidates)
            throw std::invalid_argument("select_subset: " + std::to_string(c) +
                                        " candidates exceed the exhaustive limit of 12; use greedy search");
        for (std::uint32_t mask = 1; mask < (1u << c); ++mask) {
            std::vector<std::size_t> sub;
            for (std::size_t i = 0; i < c; ++i)
                if (mask & (1u << i)) sub.push_back(i);
            const double s = eval(sub);
            ++best.evaluated;
            if (std::isfinite(s) && better(s, sub, best.score, best.subset)) {
                best.score = s;
                best.subset = std::move(sub);
            }
        }
        return best;
    }

    std::vector<bool> used(c, false);
    while (true) {
        double step_score = best.score;
        std::vector<std::size_t> step_sub;
        bool found = false;
        for (std::size_t i = 0; i < c; ++i) {
            if (used[i]) continue;
            auto sub = best.subset;
            sub.push_back(i);
            std::sort(sub.begin(), sub.end());
            const double s = eval(sub);
            ++best.evaluated;
            if (std::isfinite(s) && s < best.score && (!found || better(s, sub, step_score, step_sub))) {
                step_score = s;
                step_sub = std::move(sub);
                found = true;
            }
        }
        if (!found) break;
        for (std::size_t i : step_sub) used[i] = true;
        best.subset = std::move(step_sub);
        best.score = step_score;
    }
    return best;
}

SubsetEvaluator esn_subset_evaluator(const EsnConfig& base, std::size_t members, std::span<const double> target,
                                     const std::vector<Candidate>& candidates, std::size_t train_len) {
    const std::size_t n = target.size();
    if (train_len <= base.transient || train_len >= n)
        throw std::invalid_argument("esn_subset_evaluator: train length must leave a validation span");
    for (const auto& cand : candidates)
        if (cand.values.size() != n) throw std::invalid_argument("esn_subset_evaluator: candidate length mismatch");
    std::vector<double> y(target.begin(), target.end());
    return [base, members, y, candidates, train_len](const std::vector<std::size_t>& sub) {
        const auto n = static_cast<Eigen::Index>(y.size());
        const auto T = static_cast<Eigen::Index>(train_len);
        EsnConfig c = base;
        Mat<double> inputs;
        if (sub.empty()) {
            c.input_dim = c.constant_input ? std::max<std::size_t>(c.input_dim, 1) : 0;
            inputs = constant_inputs<double>(c, y.size());
        } else {
            c.input_dim = sub.size();
            inputs.resize(n, static_cast<Eigen::Index>(sub.size()));
            for (std::size_t k = 0; k < sub.size(); ++k)
                for (Eigen::Index t = 0; t < n; ++t)
                    inputs(t, static_cast<Eigen::Index>(k)) = candidates.at(sub[k]).values[static_cast<std::size_t>(t)];
        }
        Mat<double> targets = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
        const EnsembleModel model = ensemble_train(c, members, inputs.topRows(T), targets.topRows(T));
        const Mat<double> pred = ensemble_one_step(model, inputs.bottomRows(n - T), targets.bottomRows(n - T));
        std::vector<double> p(pred.data(), pred.data() + pred.size());
        return mae(p, std::span<const double>(y).subspan(train_len));
    };
}

} // namespace rk
