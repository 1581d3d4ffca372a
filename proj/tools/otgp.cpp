// Command-line front end: flag parsing only, all work happens in otgp/cli.hpp.
#include "otgp/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

namespace {

void add_common(CLI::App* cmd, otgp::CommonOptions& opts, std::string& config_path)
{
    cmd->add_option("--seed", opts.seed, "Base random seed")->capture_default_str();
    cmd->add_option("--alpha", opts.alpha, "Nominal miscoverage level")
        ->check(CLI::Range(1e-6, 0.999999))
        ->capture_default_str();
    cmd->add_option("--out-dir", opts.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--config", config_path, "Flat key = value config file; flags win");
}

void load_config(otgp::CommonOptions& opts, const std::string& config_path)
{
    if (!config_path.empty())
        opts.config = otgp::read_config(config_path);
}

std::string scenario_list()
{
    std::string all;
    for (const std::string& name : otgp::scenario_names())
        all += all.empty() ? name : ", " + name;
    return all;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gaussian-process regression on distributional inputs"};
    app.require_subcommand(1);

    otgp::SimulateOptions sim;
    std::string sim_config;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
    add_common(simulate, sim, sim_config);
    simulate->add_option("--scenario", sim.scenario, "Scenario name (" + scenario_list() + ")")
        ->required();

    otgp::FitOptions fit;
    std::string fit_config;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit one method on a training CSV");
    add_common(fit_cmd, fit, fit_config);
    fit_cmd->add_option("--train", fit.train_csv, "Training dataset CSV")->required();
    fit_cmd->add_option("--method", fit.method, "Method tag (" + otgp::valid_method_tags() + ")")
        ->required();
    fit_cmd->add_option("--out", fit.out_path, "Model summary path");

    otgp::BenchmarkOptions bench;
    std::string bench_config;
    CLI::App* benchmark = app.add_subcommand("benchmark", "Run the benchmark suite");
    add_common(benchmark, bench, bench_config);
    benchmark->add_option("--scenario", bench.scenarios, "Scenario names")
        ->required()
        ->delimiter(',');
    benchmark->add_option("--method", bench.methods, "Method tags")->required()->delimiter(',');
    benchmark->add_option("--seeds", bench.n_seeds, "Number of consecutive seeds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    otgp::CertifyOptions certify;
    std::string certify_config;
    CLI::App* certify_cmd =
        app.add_subcommand("certify", "Emit a uniform-band certificate for a 1D WGP fit");
    add_common(certify_cmd, certify, certify_config);
    certify_cmd->add_option("--train", certify.train_csv, "Training dataset CSV")->required();
    certify_cmd->add_option("--test", certify.test_csv, "Test dataset CSV")->required();
    certify_cmd->add_option("--a", certify.support_lo, "Class support lower end")->required();
    certify_cmd->add_option("--b", certify.support_hi, "Class support upper end")->required();
    certify_cmd->add_option("--lipschitz", certify.lipschitz, "Quantile Lipschitz bound")
        ->required();
    certify_cmd->add_option("--tau", certify.tau, "Net radius tau")->required();
    certify_cmd->add_option("--delta", certify.delta, "Band failure probability")
        ->capture_default_str();
    certify_cmd->add_option("--lf", certify.l_f, "Assumed Lipschitz constant of the target")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            load_config(sim, sim_config);
            return otgp::cmd_simulate(sim);
        }
        if (fit_cmd->parsed()) {
            load_config(fit, fit_config);
            return otgp::cmd_fit(fit);
        }
        if (benchmark->parsed()) {
            load_config(bench, bench_config);
            return otgp::cmd_benchmark(bench);
        }
        if (certify_cmd->parsed()) {
            load_config(certify, certify_config);
            return otgp::cmd_certify(certify);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
