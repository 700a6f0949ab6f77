#include <iostream>

#include <CLI11.hpp>

#include "cuspfem/cli.hpp"

int main(int argc, char** argv) {
    using namespace cuspfem::cli;
    CLI::App app{"Weighted Robin problems and trace diagnostics on cusp domains"};
    app.require_subcommand(1);

    RunConfig config;
    std::string config_path;
    std::string out_dir = ".";
    for (Command c : {Command::Solve, Command::TraceSvd, Command::Decompose, Command::TraceNorm, Command::Convergence}) {
        auto* sub = app.add_subcommand(to_string(c));
        sub->add_option("--config", config_path, "problem config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", config.seed, "seed for random probe vectors");
        sub->add_option("--threads", config.threads, "worker threads for pair sums")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", config.quiet, "suppress progress output");
        sub->callback([&config, c] { config.command = c; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }
    config.config_path = config_path;
    config.output_dir = out_dir;
    return run(config, std::cerr);
}
