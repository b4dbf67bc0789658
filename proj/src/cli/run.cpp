#include <chrono>
#include <iostream>

#include "CLI11.hpp"
#include "rk/cli.hpp"
#include "rk/errors.hpp"

namespace rk::cli {

namespace {

struct Flags {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> model;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Flags& f, bool model_flag) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", f.config, "TOML configuration file")->required();
    sub->add_option("--out", f.out, "output directory")->capture_default_str();
    sub->add_option("--seed", f.seed, "run seed (overrides the config)");
    if (model_flag) sub->add_option("--model", f.model, "srcrc, erc, drc or ngrc (overrides model.name)");
    return sub;
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"Reservoir computing toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Flags f;
    auto* forecast = add_command(app, "forecast", "train a forecaster and report MAE/MDA per split", f, true);
    auto* intervals = add_command(app, "intervals", "forecast, then fit and score prediction intervals", f, true);
    auto* ccf_cmd = add_command(app, "ccf", "cross-correlation network and predictor selection", f, false);
    auto* quantum = add_command(app, "quantum", "split-step propagation, spectrum and reservoir propagation", f, false);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::string command;
    for (auto* s : {forecast, intervals, ccf_cmd, quantum})
        if (s->parsed()) command = s->get_name();
    try {
        const auto t0 = std::chrono::steady_clock::now();
        const RunConfig c = load_config(f.config, Overrides{f.seed, f.model});
        Artifacts a{f.out, {}};
        if (command == "forecast")
            run_forecast(c, a, false);
        else if (command == "intervals")
            run_forecast(c, a, true);
        else if (command == "ccf")
            run_ccf(c, a);
        else
            run_quantum(c, a);
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(command, c, a, dt);
        std::cout << command << ": wrote " << a.files.size() << " files to " << a.out_dir.string() << "\n";
        return 0;
    } catch (const NumericalError& e) {
        std::cerr << "rk " << command << ": numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "rk " << command << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "rk " << command << ": " << e.what() << "\n";
        return 1;
    }
}

} // namespace rk::cli
