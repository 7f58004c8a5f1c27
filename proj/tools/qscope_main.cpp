#include <CLI11.hpp>

#include <optional>
#include <string>

#include "qscope/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"equivalent-time waveform sampling simulator for a two-level quantum sensor"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> backend;
    std::optional<std::string> out_dir;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "scenario config file (JSON)")->required();
        sub->add_option("--seed", seed, "override the RNG seed");
        sub->add_option("--jobs", jobs, "worker threads for sweep points");
        sub->add_option("--backend", backend, "simulation backend: filter | bloch")
            ->check(CLI::IsMember({"filter", "bloch"}));
        sub->add_option("--out", out_dir, "output directory (default: config output_dir, "
                                          "relative paths resolved under $QSCOPE_OUT)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "run an equivalent-time sweep");
    CLI::App* bode = app.add_subcommand("bode", "sensor transfer function (analytic + simulated)");
    CLI::App* sensitivity = app.add_subcommand("sensitivity", "minimum detectable field vs k");
    CLI::App* compare = app.add_subcommand("compare", "Ramsey vs differential on one waveform");
    CLI::App* reconstruct = app.add_subcommand("reconstruct", "integrative Ramsey + reconstruction");
    CLI::App* validate = app.add_subcommand("validate", "sequence checks only");
    for (CLI::App* sub : {simulate, bode, sensitivity, compare, reconstruct, validate})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);

    qscope::CliOverrides ov;
    ov.seed = seed;
    ov.jobs = jobs;
    if (backend) ov.backend = qscope::backend_from_name(*backend);
    if (out_dir) ov.out_dir = *out_dir;

    if (simulate->parsed()) return qscope::cmd_simulate(config_path, ov);
    if (bode->parsed()) return qscope::cmd_bode(config_path, ov);
    if (sensitivity->parsed()) return qscope::cmd_sensitivity(config_path, ov);
    if (compare->parsed()) return qscope::cmd_compare(config_path, ov);
    if (reconstruct->parsed()) return qscope::cmd_reconstruct(config_path, ov);
    if (validate->parsed()) return qscope::cmd_validate(config_path, ov);
    return 1;
}
