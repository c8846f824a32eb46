#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dmot/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"dmot - distributed multi-object tracking simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run one scenario and evaluate it");
    run->add_option("--config", config_path, "Scenario config (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory for the run log");
    run->add_option("--seed", seed, "Override the config's rng_seed");

    std::string spec_path;
    std::string sweep_out = "sweep_out";
    int threads = 1;
    auto* sweep = app.add_subcommand("sweep", "Run a mode/error-level/seed sweep");
    sweep->add_option("--config", spec_path, "Sweep spec (JSON)")->required();
    sweep->add_option("--out", sweep_out, "Output directory for sweep.csv");
    sweep->add_option("--threads", threads, "Parallel sweep cells");

    std::string eval_dir;
    std::optional<double> d_match;
    auto* eval = app.add_subcommand("eval", "Re-evaluate a written run directory");
    eval->add_option("--run", eval_dir, "Run log directory")->required();
    eval->add_option("--d-match", d_match, "Override the matching distance (m)");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return dmot::cmd_run(config_path, out_dir, seed);
    if (sweep->parsed()) return dmot::cmd_sweep(spec_path, sweep_out, threads);
    if (eval->parsed()) return dmot::cmd_eval(eval_dir, d_match);
    return 1;
}
