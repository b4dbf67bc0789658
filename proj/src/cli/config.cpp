#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#define TOML_EXCEPTIONS 1
#include "json.hpp"
#include "rk/cli.hpp"
#include "rk/fixtures.hpp"
#include "toml.hpp"

namespace rk::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

// Typed access to one TOML table that remembers which keys were read, so
// that leftovers can be reported as unknown.
class Section {
public:
    Section(const toml::table* t, std::string path) : t_(t), path_(std::move(path)) {}

    std::string key_path(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    const toml::node* node(std::string_view key) {
        used_.insert(std::string(key));
        return t_ ? t_->get(key) : nullptr;
    }

    void get(std::string_view key, double& out) {
        if (const auto* n = node(key)) {
            if (auto v = n->value_exact<double>())
                out = *v;
            else if (auto i = n->value_exact<std::int64_t>())
                out = static_cast<double>(*i);
            else
                fail(key_path(key), "expected a number");
        }
    }
    void get(std::string_view key, std::optional<double>& out) {
        if (t_ && t_->contains(key)) {
            double v = 0.0;
            get(key, v);
            out = v;
        } else {
            used_.insert(std::string(key));
        }
    }
    void get(std::string_view key, std::size_t& out) {
        if (const auto* n = node(key)) {
            auto i = n->value_exact<std::int64_t>();
            if (!i || *i < 0) fail(key_path(key), "expected a non-negative integer");
            out = static_cast<std::size_t>(*i);
        }
    }
    void get(std::string_view key, std::optional<std::size_t>& out) {
        if (t_ && t_->contains(key)) {
            std::size_t v = 0;
            get(key, v);
            out = v;
        } else {
            used_.insert(std::string(key));
        }
    }
    void get(std::string_view key, int& out) {
        if (const auto* n = node(key)) {
            auto i = n->value_exact<std::int64_t>();
            if (!i) fail(key_path(key), "expected an integer");
            out = static_cast<int>(*i);
        }
    }
    void get(std::string_view key, bool& out) {
        if (const auto* n = node(key)) {
            auto b = n->value_exact<bool>();
            if (!b) fail(key_path(key), "expected true or false");
            out = *b;
        }
    }
    void get(std::string_view key, std::optional<bool>& out) {
        if (t_ && t_->contains(key)) {
            bool v = false;
            get(key, v);
            out = v;
        } else {
            used_.insert(std::string(key));
        }
    }
    void get(std::string_view key, std::string& out) {
        if (const auto* n = node(key)) {
            auto s = n->value_exact<std::string>();
            if (!s) fail(key_path(key), "expected a string");
            out = *s;
        }
    }
    void get(std::string_view key, std::vector<std::string>& out) {
        if (const auto* n = node(key)) {
            const auto* a = n->as_array();
            if (!a) fail(key_path(key), "expected an array of strings");
            out.clear();
            for (const auto& e : *a) {
                auto s = e.value_exact<std::string>();
                if (!s) fail(key_path(key), "expected an array of strings");
                out.push_back(*s);
            }
        }
    }
    void get(std::string_view key, std::vector<double>& out) {
        if (const auto* n = node(key)) {
            const auto* a = n->as_array();
            if (!a) fail(key_path(key), "expected an array of numbers");
            out.clear();
            for (const auto& e : *a) {
                if (auto d = e.value_exact<double>())
                    out.push_back(*d);
                else if (auto i = e.value_exact<std::int64_t>())
                    out.push_back(static_cast<double>(*i));
                else
                    fail(key_path(key), "expected an array of numbers");
            }
        }
    }

    /// Sub-table or nullptr when absent.
    const toml::table* table(std::string_view key) {
        const auto* n = node(key);
        if (!n) return nullptr;
        const auto* t = n->as_table();
        if (!t) fail(key_path(key), "expected a table");
        return t;
    }

    const toml::array* array_of_tables(std::string_view key) {
        const auto* n = node(key);
        if (!n) return nullptr;
        const auto* a = n->as_array();
        if (!a || !a->is_array_of_tables()) fail(key_path(key), "expected an array of tables");
        return a;
    }

    void finish() const {
        if (!t_) return;
        for (const auto& [k, v] : *t_)
            if (!used_.count(std::string(k.str()))) fail(key_path(k.str()), "unknown key");
    }

    const std::string& path() const { return path_; }

private:
    const toml::table* t_;
    std::string path_;
    std::set<std::string> used_;
};

template <class E>
E parse_enum(const std::string& path, const std::string& value,
             std::initializer_list<std::pair<const char*, E>> options) {
    std::string names;
    for (const auto& [name, e] : options) {
        if (value == name) return e;
        names += names.empty() ? name : std::string(", ") + name;
    }
    fail(path, "'" + value + "' is not one of " + names);
}

const char* name_of(FeedbackDist d) { return d == FeedbackDist::uniform ? "uniform" : "binary"; }
const char* name_of(WeightSign w) { return w == WeightSign::inhomogeneous ? "inhomogeneous" : "homogeneous"; }
const char* name_of(OutputActivation a) { return a == OutputActivation::identity ? "identity" : "tanh"; }
const char* name_of(Window w) { return w == Window::hann ? "hann" : "rectangular"; }
const char* name_of(FamilyChoice f) {
    switch (f) {
    case FamilyChoice::bic: return "bic";
    case FamilyChoice::nig: return "nig";
    case FamilyChoice::gaussian: return "gaussian";
    }
    return "?";
}

void read_esn(Section& s, EsnConfig& c, std::size_t* members) {
    s.get("state_dim", c.state_dim);
    s.get("spectral_radius", c.spectral_radius);
    s.get("density", c.density);
    s.get("leaking_rate", c.leaking_rate);
    s.get("regularization", c.regularization);
    s.get("transient", c.transient);
    s.get("teacher_noise", c.teacher_noise);
    s.get("input_scale", c.input_scale);
    s.get("feedback_scale", c.feedback_scale);
    s.get("quadratic_readout", c.quadratic_readout);
    std::string v;
    s.get("feedback_dist", v);
    if (!v.empty())
        c.feedback_dist = parse_enum<FeedbackDist>(s.key_path("feedback_dist"), v,
                                                   {{"uniform", FeedbackDist::uniform}, {"binary", FeedbackDist::binary}});
    v.clear();
    s.get("weight_sign", v);
    if (!v.empty())
        c.weight_sign = parse_enum<WeightSign>(s.key_path("weight_sign"), v,
                                               {{"inhomogeneous", WeightSign::inhomogeneous},
                                                {"homogeneous", WeightSign::homogeneous}});
    v.clear();
    s.get("output_activation", v);
    if (!v.empty())
        c.output_activation = parse_enum<OutputActivation>(
            s.key_path("output_activation"), v, {{"identity", OutputActivation::identity}, {"tanh", OutputActivation::tanh}});
    std::optional<double> ci;
    s.get("constant_input", ci);
    if (ci) c.constant_input = ci;
    if (members) s.get("members", *members);
    s.finish();
    // Re-throw validation failures with the section path in front.
    EsnConfig probe = c;
    if (probe.input_dim == 0) probe.input_dim = 1;
    try {
        probe.validate();
    } catch (const std::invalid_argument& e) {
        fail(s.path(), e.what());
    }
    if (members && *members == 0) fail(s.key_path("members"), "must be at least 1");
}

json esn_json(const EsnConfig& c) {
    json j{{"state_dim", c.state_dim},
           {"spectral_radius", c.spectral_radius},
           {"density", c.density},
           {"leaking_rate", c.leaking_rate},
           {"regularization", c.regularization},
           {"transient", c.transient},
           {"teacher_noise", c.teacher_noise},
           {"input_scale", c.input_scale},
           {"feedback_scale", c.feedback_scale},
           {"quadratic_readout", c.quadratic_readout},
           {"feedback_dist", name_of(c.feedback_dist)},
           {"weight_sign", name_of(c.weight_sign)},
           {"output_activation", name_of(c.output_activation)},
           {"seed", c.seed}};
    if (c.constant_input) j["constant_input"] = *c.constant_input;
    return j;
}

void apply_model_defaults(ModelConfig& m, std::uint64_t seed) {
    m.esn = fixtures::srcrc_config(Rng::split(seed, 0));
    m.members = 1;
    if (m.name == "erc") {
        m.esn.leaking_rate = 0.98;
        m.esn.state_dim = 80;
        m.esn.regularization = 0.51;
        m.esn.spectral_radius = 1.4;
        m.esn.density = 0.011;
        m.members = 240;
    }
    m.drc = fixtures::drc_config(seed, 52);
    m.ngrc = NgrcConfig{};
}

} // namespace

RunConfig parse_config(std::string_view text, const Overrides& ov, const std::filesystem::path& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(os.str());
    }
    RunConfig c;
    c.base_dir = base_dir;
    Section top(&root, "");
    std::size_t seed = 1;
    top.get("seed", seed);
    c.seed = ov.seed ? *ov.seed : static_cast<std::uint64_t>(seed);

    // model
    {
        Section s(top.table("model"), "model");
        s.get("name", c.model.name);
        if (ov.model) c.model.name = *ov.model;
        if (c.model.name != "srcrc" && c.model.name != "erc" && c.model.name != "drc" && c.model.name != "ngrc")
            fail("model.name", "'" + c.model.name + "' is not one of srcrc, erc, drc, ngrc");
        apply_model_defaults(c.model, c.seed);
        s.get("mode", c.model.mode);
        if (c.model.mode != "free_run" && c.model.mode != "one_step")
            fail("model.mode", "'" + c.model.mode + "' is not one of free_run, one_step");
        s.get("period", c.model.drc.period);
        s.get("seasonal_phase_lookup", c.model.drc.seasonal_phase_lookup);
        {
            Section e(s.table("esn"), "model.esn");
            read_esn(e, c.model.esn, &c.model.members);
        }
        {
            Section e(s.table("trend"), "model.trend");
            read_esn(e, c.model.drc.trend, &c.model.drc.trend_members);
        }
        {
            Section e(s.table("seasonal"), "model.seasonal");
            read_esn(e, c.model.drc.seasonal, &c.model.drc.seasonal_members);
        }
        {
            Section e(s.table("residual"), "model.residual");
            read_esn(e, c.model.drc.residual, &c.model.drc.residual_members);
        }
        {
            Section n(s.table("ngrc"), "model.ngrc");
            n.get("delay_depth", c.model.ngrc.delay_depth);
            n.get("regularization", c.model.ngrc.regularization);
            n.finish();
            if (c.model.ngrc.delay_depth < 1) fail("model.ngrc.delay_depth", "must be at least 1");
            if (!(c.model.ngrc.regularization >= 0.0)) fail("model.ngrc.regularization", "must be >= 0");
        }
        if (c.model.drc.period < 2) fail("model.period", "must be at least 2");
        if (c.model.name == "srcrc" && c.model.members != 1)
            fail("model.esn.members", "srcrc uses a single reservoir; use erc for ensembles");
        s.finish();
    }
    // data
    {
        Section s(top.table("data"), "data");
        s.get("path", c.data.path);
        s.get("date_column", c.data.schema.date_column);
        s.get("target", c.data.schema.target);
        s.get("regressors", c.data.schema.regressors);
        s.get("min_rows", c.data.schema.min_rows);
        s.get("mda_threshold", c.data.mda_threshold);
        s.finish();
        if (!(c.data.mda_threshold >= 0.0)) fail("data.mda_threshold", "must be >= 0");
    }
    // splits
    {
        Section s(top.table("splits"), "splits");
        s.get("train", c.splits.train);
        s.get("validation", c.splits.validation);
        s.finish();
    }
    // intervals
    {
        Section s(top.table("intervals"), "intervals");
        s.get("enabled", c.intervals.enabled);
        s.get("pinc", c.intervals.pinc);
        s.get("threshold", c.intervals.threshold);
        std::string fam;
        s.get("family", fam);
        if (!fam.empty())
            c.intervals.family = parse_enum<FamilyChoice>(
                "intervals.family", fam,
                {{"bic", FamilyChoice::bic}, {"nig", FamilyChoice::nig}, {"gaussian", FamilyChoice::gaussian}});
        s.finish();
        if (c.intervals.pinc.empty()) fail("intervals.pinc", "needs at least one level");
        for (double p : c.intervals.pinc)
            if (!(p > 0.0 && p < 1.0)) fail("intervals.pinc", "levels must lie in (0, 1)");
        if (!(c.intervals.threshold > 0.0)) fail("intervals.threshold", "must be > 0");
    }
    // ccf
    {
        Section s(top.table("ccf"), "ccf");
        s.get("date_column", c.ccf.date_column);
        s.get("min_rows", c.ccf.min_rows);
        s.get("max_lag", c.ccf.max_lag);
        s.get("z", c.ccf.z);
        s.get("ar_order", c.ccf.ar_order);
        s.get("select_targets", c.ccf.select_targets);
        s.get("select_train", c.ccf.select_train);
        s.get("members", c.ccf.members);
        c.ccf.evaluator = fixtures::lag_shift_fixture(0).evaluator;
        c.ccf.evaluator.seed = Rng::split(c.seed, 4);
        {
            Section e(s.table("evaluator"), "ccf.evaluator");
            read_esn(e, c.ccf.evaluator, nullptr);
        }
        if (const auto* arr = s.array_of_tables("series")) {
            std::size_t i = 0;
            for (const auto& node : *arr) {
                Section e(node.as_table(), "ccf.series[" + std::to_string(i++) + "]");
                CcfSeries cs;
                e.get("name", cs.name);
                e.get("path", cs.path);
                e.get("column", cs.column);
                e.finish();
                if (cs.path.empty()) fail(e.key_path("path"), "is required");
                if (cs.column.empty()) fail(e.key_path("column"), "is required");
                if (cs.name.empty()) cs.name = cs.column;
                c.ccf.series.push_back(cs);
            }
        }
        s.finish();
        if (c.ccf.max_lag < 1) fail("ccf.max_lag", "must be at least 1");
        if (!(c.ccf.z > 0.0)) fail("ccf.z", "must be > 0");
        if (c.ccf.members == 0) fail("ccf.members", "must be at least 1");
    }
    // quantum
    {
        Section s(top.table("quantum"), "quantum");
        s.get("system", c.quantum.system);
        s.get("mode", c.quantum.mode);
        s.get("steps", c.quantum.steps);
        s.get("dt", c.quantum.dt);
        std::string w;
        s.get("window", w);
        if (!w.empty())
            c.quantum.window =
                parse_enum<Window>("quantum.window", w, {{"rectangular", Window::rectangular}, {"hann", Window::hann}});
        s.get("prominence", c.quantum.prominence);
        s.get("eigenfunctions", c.quantum.eigenfunctions);
        {
            Section r(s.table("rc"), "quantum.rc");
            r.get("train_steps", c.quantum.train_steps);
            r.get("test_steps", c.quantum.test_steps);
            r.get("multi_step", c.quantum.multi_step);
            r.get("state_dim", c.quantum.state_dim);
            r.finish();
        }
        s.finish();
        const auto names = fixtures::quantum_preset_names();
        if (std::find(names.begin(), names.end(), c.quantum.system) == names.end())
            fail("quantum.system", "'" + c.quantum.system + "' is not one of ho1d, morse, quartic_poly, ho2d");
        if (c.quantum.mode != "oracle_only" && c.quantum.mode != "rc")
            fail("quantum.mode", "'" + c.quantum.mode + "' is not one of oracle_only, rc");
        if (c.quantum.mode == "rc" && c.quantum.train_steps && *c.quantum.train_steps == 0)
            fail("quantum.rc.train_steps", "must be positive in rc mode");
        if (c.quantum.dt && !(*c.quantum.dt != 0.0)) fail("quantum.dt", "must be nonzero");
        if (c.quantum.prominence && !(*c.quantum.prominence > 0.0 && *c.quantum.prominence < 1.0))
            fail("quantum.prominence", "must lie in (0, 1)");
    }
    top.finish();
    return c;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& ov) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("--config: cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), ov, path.parent_path());
}

std::string canonical_config(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["model"] = {{"name", c.model.name},
                  {"mode", c.model.mode},
                  {"esn", esn_json(c.model.esn)},
                  {"members", c.model.members},
                  {"period", c.model.drc.period},
                  {"seasonal_phase_lookup", c.model.drc.seasonal_phase_lookup},
                  {"trend", esn_json(c.model.drc.trend)},
                  {"seasonal", esn_json(c.model.drc.seasonal)},
                  {"residual", esn_json(c.model.drc.residual)},
                  {"trend_members", c.model.drc.trend_members},
                  {"seasonal_members", c.model.drc.seasonal_members},
                  {"residual_members", c.model.drc.residual_members},
                  {"ngrc", {{"delay_depth", c.model.ngrc.delay_depth}, {"regularization", c.model.ngrc.regularization}}}};
    j["data"] = {{"path", c.data.path},
                 {"date_column", c.data.schema.date_column},
                 {"target", c.data.schema.target},
                 {"regressors", c.data.schema.regressors},
                 {"min_rows", c.data.schema.min_rows},
                 {"mda_threshold", c.data.mda_threshold}};
    j["splits"] = {{"train", c.splits.train}, {"validation", c.splits.validation}};
    j["intervals"] = {{"enabled", c.intervals.enabled},
                      {"pinc", c.intervals.pinc},
                      {"threshold", c.intervals.threshold},
                      {"family", name_of(c.intervals.family)}};
    json series = json::array();
    for (const auto& s : c.ccf.series) series.push_back({{"name", s.name}, {"path", s.path}, {"column", s.column}});
    j["ccf"] = {{"series", series},
                {"date_column", c.ccf.date_column},
                {"min_rows", c.ccf.min_rows},
                {"max_lag", c.ccf.max_lag},
                {"z", c.ccf.z},
                {"ar_order", c.ccf.ar_order},
                {"select_targets", c.ccf.select_targets},
                {"select_train", c.ccf.select_train},
                {"members", c.ccf.members},
                {"evaluator", esn_json(c.ccf.evaluator)}};
    json q = {{"system", c.quantum.system}, {"mode", c.quantum.mode}, {"eigenfunctions", c.quantum.eigenfunctions}};
    if (c.quantum.steps) q["steps"] = *c.quantum.steps;
    if (c.quantum.dt) q["dt"] = *c.quantum.dt;
    if (c.quantum.window) q["window"] = name_of(*c.quantum.window);
    if (c.quantum.prominence) q["prominence"] = *c.quantum.prominence;
    if (c.quantum.train_steps) q["train_steps"] = *c.quantum.train_steps;
    if (c.quantum.test_steps) q["test_steps"] = *c.quantum.test_steps;
    if (c.quantum.multi_step) q["multi_step"] = *c.quantum.multi_step;
    if (c.quantum.state_dim) q["state_dim"] = *c.quantum.state_dim;
    j["quantum"] = q;
    return j.dump();
}

std::string config_hash(const RunConfig& c) { return sha256_hex(canonical_config(c)); }

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

} // namespace rk::cli
