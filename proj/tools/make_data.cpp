// Writes the synthetic datasets shipped under data/.
//
//   rk-make-data <out_dir>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rk/fixtures.hpp"
#include "rk/rng.hpp"

namespace fs = std::filesystem;
using namespace std::chrono;

namespace {

std::string iso(sys_days d) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
    if (!out) throw std::runtime_error("cannot write " + p.string());
    std::cout << p.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: rk-make-data <out_dir>\n";
        return 2;
    }
    const fs::path dir = argv[1];
    fs::create_directories(dir);
    const sys_days weekly0 = year(2013) / March / 4, daily0 = year(2020) / January / 1;

    {
        const auto s = rk::fixtures::seasonal_benchmark(1);
        std::string csv = "date,price,stock,volume\n";
        for (std::size_t t = 0; t < s.y.size(); ++t)
            csv += iso(weekly0 + weeks(t)) + "," + num(s.y[t]) + "," +
                   num(s.regressors(static_cast<Eigen::Index>(t), 0)) + "," +
                   num(s.regressors(static_cast<Eigen::Index>(t), 1)) + "\n";
        write(dir / "seasonal.csv", csv);
    }
    {
        std::string csv = "date,u,y\n";
        for (std::size_t t = 0; t < 200; ++t) {
            const double u = std::sin(static_cast<double>(t) / 5.0);
            csv += iso(daily0 + days(t)) + "," + num(u) + "," + num(0.5 * std::pow(u, 7)) + "\n";
        }
        write(dir / "sin7.csv", csv);
    }
    {
        const auto ch = rk::fixtures::chain_series(1000, 1);
        std::string csv = "date,A,B,C\n";
        for (std::size_t t = 0; t < ch[0].size(); ++t)
            csv += iso(daily0 + days(t)) + "," + num(ch[0][t]) + "," + num(ch[1][t]) + "," + num(ch[2][t]) + "\n";
        write(dir / "chain.csv", csv);
    }
    {
        rk::Rng rx(501), ry(502);
        std::string csv = "date,x,y\n";
        for (std::size_t t = 0; t < 500; ++t) csv += iso(daily0 + days(t)) + "," + num(rx.normal()) + "," + num(ry.normal()) + "\n";
        write(dir / "independent.csv", csv);
    }
    {
        const auto f = rk::fixtures::lag_shift_fixture(1);
        // The raw driver is the lag-2 candidate shifted back by two steps.
        const auto& lagged = f.candidates[1].values;
        std::string csv = "date,y,x,noise1,noise2\n";
        const std::size_t n = f.target.size();
        for (std::size_t t = 0; t + 2 < n; ++t)
            csv += iso(daily0 + days(t)) + "," + num(f.target[t]) + "," + num(lagged[t + 2]) + "," +
                   num(f.candidates[0].values[t]) + "," + num(f.candidates[2].values[t]) + "\n";
        write(dir / "lagshift.csv", csv);
    }
    return 0;
}
