// omcavity: equivalent-circuit mode extraction, two-tone response
// simulation, parameter fitting and DC-bias tuning for a cavity
// optomechanical system. See README.md for config formats.

#include <CLI11.hpp>

#include "omcav/cli.hpp"

namespace {

struct SubArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double snr_db = 0.0;
    bool snr_set = false;
    double linear_max_nd = 0.0;
    bool linear_set = false;

    omcav::cli::CommonOptions to_options() const {
        omcav::cli::CommonOptions o;
        o.config = config;
        o.out_dir = out;
        if (seed_set) o.seed = seed;
        if (snr_set) o.snr_db = snr_db;
        if (linear_set) o.linear_max_nd = linear_max_nd;
        return o;
    }
};

void add_common(CLI::App* cmd, SubArgs& args) {
    cmd->add_option("--config", args.config, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "output directory (overrides config out_dir)");
    cmd->add_option("--seed", args.seed, "noise seed")->each([&args](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--snr-db", args.snr_db, "noise level (omit for noiseless)")
        ->each([&args](const std::string&) { args.snr_set = true; });
    cmd->add_option("--linear-max-nd", args.linear_max_nd,
                    "upper photon-number bound of the linear cooperativity regime")
        ->each([&args](const std::string&) { args.linear_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cavity optomechanics modeling and parameter extraction"};
    app.require_subcommand(1);

    SubArgs modes_args, simulate_args, fit_args, tune_args;
    add_common(app.add_subcommand("modes", "extract resonant modes from a network description"),
               modes_args);
    add_common(app.add_subcommand("simulate", "generate synthetic probe sweeps"), simulate_args);
    add_common(app.add_subcommand("fit", "fit bare / two-tone / batch sweeps"), fit_args);
    add_common(app.add_subcommand("tune", "DC-bias tuning model and parabola fit"), tune_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? omcav::cli::kExitInput : omcav::cli::kExitOk;
    }

    if (app.got_subcommand("modes")) return omcav::cli::run_modes(modes_args.to_options());
    if (app.got_subcommand("simulate"))
        return omcav::cli::run_simulate(simulate_args.to_options());
    if (app.got_subcommand("fit")) return omcav::cli::run_fit(fit_args.to_options());
    if (app.got_subcommand("tune")) return omcav::cli::run_tune(tune_args.to_options());
    return omcav::cli::kExitInput;
}
