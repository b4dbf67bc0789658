#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include "rk/cli.hpp"

namespace rk::cli {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        std::string f = line.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
        const auto b = f.find_first_not_of(" \t\r");
        const auto e = f.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_number(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    return ec == std::errc() && p == end && std::isfinite(v);
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "NaN" || s == "nan"; }

bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        out = out * 10 + (s[i] - '0');
    }
    return true;
}

Scaling scaling_of(const std::vector<double>& v, const std::string& column) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (!(*hi > *lo)) throw ConfigError("data: column '" + column + "' is constant; [-1, 1] scaling is undefined");
    return {*lo, *hi};
}

} // namespace

bool is_iso_date(std::string_view s) {
    int y = 0, m = 0, d = 0;
    if (s.size() < 10 || !digits(s, 0, 4, y) || s[4] != '-' || !digits(s, 5, 2, m) || s[7] != '-' ||
        !digits(s, 8, 2, d))
        return false;
    const std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(static_cast<unsigned>(m)),
                                          std::chrono::day(static_cast<unsigned>(d))};
    if (!ymd.ok()) return false;
    if (s.size() == 10) return true;
    int hh = 0, mm = 0, ss = 0;
    if (s[10] != 'T' || !digits(s, 11, 2, hh) || s.size() < 16 || s[13] != ':' || !digits(s, 14, 2, mm)) return false;
    if (hh > 23 || mm > 59) return false;
    if (s.size() == 16) return true;
    return s.size() == 19 && s[16] == ':' && digits(s, 17, 2, ss) && ss <= 60;
}

std::vector<double> SeriesBundle::scaled_target() const {
    std::vector<double> out(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) out[i] = target_scaling.scale(target[i]);
    return out;
}

Mat<double> SeriesBundle::scaled_regressors() const {
    Mat<double> m(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(regressors.size()));
    for (std::size_t j = 0; j < regressors.size(); ++j)
        for (std::size_t i = 0; i < size(); ++i)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = regressor_scaling[j].scale(regressors[j][i]);
    return m;
}

SeriesBundle ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    if (schema.target.empty()) throw ConfigError("data.target: is required");
    std::ifstream in(path);
    if (!in) throw ConfigError("data.path: cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("data: " + path.string() + " has no header row");
    const auto header = split_row(line);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
    auto column = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw ConfigError("data: column '" + name + "' not found in " + path.string());
        return it->second;
    };
    const std::size_t date_col = column(schema.date_column);
    const std::size_t target_col = column(schema.target);
    std::vector<std::size_t> reg_cols;
    for (const auto& r : schema.regressors) reg_cols.push_back(column(r));

    SeriesBundle b;
    b.target_name = schema.target;
    b.regressor_names = schema.regressors;
    b.regressors.resize(reg_cols.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_row(line);
        const std::string where = path.filename().string() + ":" + std::to_string(line_no);
        if (f.size() != header.size())
            throw ConfigError("data: " + where + " has " + std::to_string(f.size()) + " fields, header has " +
                              std::to_string(header.size()));
        if (!is_iso_date(f[date_col])) throw ConfigError("data: " + where + " unparseable date '" + f[date_col] + "'");
        if (is_missing(f[target_col])) {
            ++b.dropped_rows;
            continue;
        }
        double v = 0.0;
        if (!parse_number(f[target_col], v))
            throw ConfigError("data: " + where + " target value '" + f[target_col] + "' is not a number");
        b.timestamps.push_back(f[date_col]);
        b.target.push_back(v);
        for (std::size_t j = 0; j < reg_cols.size(); ++j) {
            double r = 0.0;
            if (!parse_number(f[reg_cols[j]], r))
                throw ConfigError("data: " + where + " regressor '" + schema.regressors[j] + "' value '" +
                                  f[reg_cols[j]] + "' is not a number");
            b.regressors[j].push_back(r);
        }
    }
    if (b.size() < schema.min_rows)
        throw ConfigError("data: " + path.string() + " has " + std::to_string(b.size()) + " usable rows, need " +
                          std::to_string(schema.min_rows) + " (data.min_rows)");
    if (b.size() < 2) throw ConfigError("data: " + path.string() + " needs at least 2 usable rows");
    b.target_scaling = scaling_of(b.target, schema.target);
    for (std::size_t j = 0; j < b.regressors.size(); ++j)
        b.regressor_scaling.push_back(scaling_of(b.regressors[j], schema.regressors[j]));
    return b;
}

} // namespace rk::cli
