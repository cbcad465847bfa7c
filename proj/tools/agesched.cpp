// Command-line front end: solve, simulate, compare, verify, oracle.

#include "agesched/commands.hpp"
#include "agesched/config.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace agesched;

int main(int argc, char** argv) {
    CLI::App app{"Age-minimal CPU scheduling: solver, simulator and benchmarks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string policy;
    int b = 0;
    double alpha = 2.0;
    double p_bar = 1.0;

    auto with_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "YAML run configuration")->required();
        cmd->add_option("--out", out_dir, "output directory (default: output.dir)");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve for the age-minimal policy");
    with_config(solve);
    CLI::App* sim = app.add_subcommand("simulate", "simulate a policy");
    with_config(sim);
    sim->add_option("--policy", policy, "benchmark name or policy.csv path")->required();
    sim->add_option("--seed", seed, "RNG seed (default: simulation.seed)");
    CLI::App* compare = app.add_subcommand("compare", "six-policy comparison over p_bar");
    with_config(compare);
    compare->add_option("--seed", seed, "RNG seed (default: simulation.seed)");
    CLI::App* verify = app.add_subcommand("verify", "structural checks on solve outputs");
    with_config(verify);
    CLI::App* oracle = app.add_subcommand("oracle", "fixed-size closed form");
    oracle->add_option("--b", b, "batches per task")->required();
    oracle->add_option("--alpha", alpha, "chip parameter in (1, 2]");
    oracle->add_option("--p_bar", p_bar, "average power budget");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    if (oracle->parsed())
        return cmd_oracle(b, alpha, p_bar, std::cout);

    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitInput;
    }
    if (seed)
        cfg.seed = *seed;
    const std::filesystem::path out = out_dir.empty() ? cfg.output_dir : std::filesystem::path(out_dir);

    if (solve->parsed())
        return cmd_solve(cfg, out, std::cerr);
    if (sim->parsed())
        return cmd_simulate(cfg, policy, out, seed, std::cerr);
    if (compare->parsed())
        return cmd_compare(cfg, out, std::cerr);
    return cmd_verify(cfg, out, std::cerr);
}
