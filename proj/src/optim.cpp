#include "rk/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rk {

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("nelder_mead: empty start point");
    NelderMeadResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> s(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += opt.initial_step;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(s[i]);

    std::vector<std::size_t> idx(n + 1);
    std::vector<double> c(n), xr(n), xe(n), xc(n);
    while (res.evaluations < opt.max_evaluations) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = idx.front(), worst = idx.back(), second = idx[n - 1];

        double diam = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(s[i][j] - s[best][j]));
        if (std::isfinite(fv[worst]) && fv[worst] - fv[best] <= opt.f_tol * (1.0 + std::abs(fv[best])) &&
            diam <= opt.x_tol * (1.0 + std::abs(s[best][0]))) {
            res.converged = true;
            break;
        }

        std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i)
            if (i != worst)
                for (std::size_t j = 0; j < n; ++j) c[j] += s[i][j] / static_cast<double>(n);

        for (std::size_t j = 0; j < n; ++j) xr[j] = c[j] + (c[j] - s[worst][j]);
        const double fr = eval(xr);
        if (fr < fv[best]) {
            for (std::size_t j = 0; j < n; ++j) xe[j] = c[j] + 2.0 * (c[j] - s[worst][j]);
            const double fe = eval(xe);
            if (fe < fr) {
                s[worst] = xe;
                fv[worst] = fe;
            } else {
                s[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            s[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        for (std::size_t j = 0; j < n; ++j)
            xc[j] = outside ? c[j] + 0.5 * (xr[j] - c[j]) : c[j] + 0.5 * (s[worst][j] - c[j]);
        const double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
            s[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t j = 0; j < n; ++j) s[i][j] = s[best][j] + 0.5 * (s[i][j] - s[best][j]);
            fv[i] = eval(s[i]);
        }
    }
    const auto b = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = s[b];
    res.value = fv[b];
    return res;
}

} // namespace rk
