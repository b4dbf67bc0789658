#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rk/crosscorr.hpp"
#include "rk/esn.hpp"
#include "rk/intervals.hpp"
#include "rk/quantum.hpp"
#include "rk/variants.hpp"

namespace rk::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Bad configuration or usage; the message starts with the offending field
/// path, e.g. "model.esn.state_dim: expected a non-negative integer".
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ------------------------------------------------------------ ingestion

/// Linear map of [min, max] onto [-1, 1].
struct Scaling {
    double min = -1.0;
    double max = 1.0;

    double scale(double v) const { return 2.0 * (v - min) / (max - min) - 1.0; }
    double unscale(double s) const { return min + 0.5 * (s + 1.0) * (max - min); }
};

struct CsvSchema {
    std::string date_column = "date";
    std::string target;
    std::vector<std::string> regressors;
    std::size_t min_rows = 20;
};

struct SeriesBundle {
    std::vector<std::string> timestamps; // as written in the file
    std::string target_name;
    std::vector<double> target;          // original units
    std::vector<std::string> regressor_names;
    std::vector<std::vector<double>> regressors; // [column][row], original units
    Scaling target_scaling;
    std::vector<Scaling> regressor_scaling;
    std::size_t dropped_rows = 0;        // rows whose target was empty or NA

    std::size_t size() const { return target.size(); }
    std::vector<double> scaled_target() const;
    Mat<double> scaled_regressors() const; // rows x regressors
};

/// Comma-separated file with a header row. Dates must be ISO 8601
/// (YYYY-MM-DD, optionally followed by THH:MM[:SS]). Rows with an empty or
/// "NA" target are dropped and counted; a missing regressor value is an
/// error. Fields are split on commas without quote handling.
SeriesBundle ingest_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// True for YYYY-MM-DD with an optional THH:MM or THH:MM:SS suffix naming a
/// real calendar date and time.
bool is_iso_date(std::string_view s);

// --------------------------------------------------------------- config

struct ModelConfig {
    std::string name = "drc"; // srcrc, erc, drc, ngrc
    std::string mode = "free_run"; // free_run, one_step
    EsnConfig esn;             // srcrc and erc
    std::size_t members = 1;   // erc ensemble size
    DrcConfig drc;
    NgrcConfig ngrc;
};

struct DataConfig {
    std::string path;
    CsvSchema schema;
    double mda_threshold = 0.05;
};

struct SplitConfig {
    std::size_t train = 0;
    std::size_t validation = 0; // test is whatever remains
};

struct IntervalConfig {
    bool enabled = false;
    std::vector<double> pinc{0.6, 0.7, 0.8, 0.9};
    double threshold = 0.1;
    FamilyChoice family = FamilyChoice::bic;
};

struct CcfSeries {
    std::string name;
    std::string path;
    std::string column;
};

struct CcfConfig {
    std::vector<CcfSeries> series;
    std::string date_column = "date";
    std::size_t min_rows = 20;
    int max_lag = 10;
    double z = kZ95;
    std::size_t ar_order = 8;
    std::vector<std::string> select_targets; // empty: no subset selection
    std::size_t select_train = 0; // 0: 70% of the rows
    std::size_t members = 3;
    EsnConfig evaluator;
};

struct QuantumConfig {
    std::string system = "ho1d";
    std::string mode = "oracle_only"; // oracle_only, rc
    std::optional<std::size_t> steps;
    std::optional<double> dt;
    std::optional<Window> window;
    std::optional<double> prominence;
    std::size_t eigenfunctions = 4;
    // rc overrides; unset fields keep the preset values
    std::optional<std::size_t> train_steps;
    std::optional<std::size_t> test_steps;
    std::optional<bool> multi_step;
    std::optional<std::size_t> state_dim;
};

struct RunConfig {
    std::uint64_t seed = 1;
    ModelConfig model;
    DataConfig data;
    SplitConfig splits;
    IntervalConfig intervals;
    CcfConfig ccf;
    QuantumConfig quantum;
    std::filesystem::path base_dir; // relative data paths resolve here
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> model;
};

/// Parses a TOML document. Unknown keys and wrongly typed values raise
/// ConfigError with the field path. Overrides win over file values.
RunConfig parse_config(std::string_view toml_text, const Overrides& overrides = {},
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

/// Canonical JSON of the effective configuration (sorted keys, no whitespace).
std::string canonical_config(const RunConfig& c);

/// SHA-256 of canonical_config, hex encoded.
std::string config_hash(const RunConfig& c);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// ------------------------------------------------------------- commands

struct Artifacts {
    std::filesystem::path out_dir;
    std::vector<std::string> files; // relative to out_dir, in write order
};

void run_forecast(const RunConfig& c, Artifacts& out, bool with_intervals);
void run_ccf(const RunConfig& c, Artifacts& out);
void run_quantum(const RunConfig& c, Artifacts& out);

/// manifest.json: command, config hash, seed, version, SHA-256 of every
/// artifact and the wall time.
void write_manifest(const std::string& command, const RunConfig& c, const Artifacts& a, double runtime_s);

/// Entry point of the `rk` binary. Returns 0 on success, 2 for usage or
/// configuration errors, 3 for numerical failures.
int run(int argc, char** argv);

} // namespace rk::cli
