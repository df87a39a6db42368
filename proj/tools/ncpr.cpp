// Experiment runner: train CPNN checkpoints, simulate closed-loop runs,
// compare controllers side by side, and verify the numeric oracle suites.
//
// Exit codes: 0 ok, 1 experiment failure, 2 usage error.

#include "ncpr/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

Eigen::VectorXd parse_z0(const std::string& text) {
    std::vector<double> values;
    std::string token;
    std::stringstream ss(text);
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        values.push_back(std::stod(token));
    }
    Eigen::VectorXd z0(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
        z0[static_cast<Eigen::Index>(i)] = values[i];
    return z0;
}

// Controller tokens for `compare`: "mpc", "kind=checkpoint", or
// "label:kind=checkpoint".
ncpr::ControllerSpec parse_controller_token(const std::string& token) {
    ncpr::ControllerSpec spec;
    std::string head = token;
    const std::size_t eq = token.find('=');
    if (eq != std::string::npos) {
        head = token.substr(0, eq);
        spec.checkpoint_path = token.substr(eq + 1);
    }
    const std::size_t colon = head.find(':');
    if (colon != std::string::npos) {
        spec.label = head.substr(0, colon);
        spec.kind = head.substr(colon + 1);
    } else {
        spec.kind = head;
    }
    if (spec.kind != "mpc" && spec.kind != "cpnn_unconstrained" &&
        spec.kind != "cpnn_constrained")
        throw CLI::ValidationError(
            "controller", "unknown controller kind '" + spec.kind +
                          "' (use mpc, cpnn_unconstrained, or cpnn_constrained)");
    if (spec.kind != "mpc" && spec.checkpoint_path.empty())
        throw CLI::ValidationError("controller",
                                   "'" + spec.kind + "' needs kind=checkpoint.ckpt");
    return spec;
}

struct LoadedConfig {
    ncpr::ExperimentConfig config;
    std::vector<std::string> env_overrides;
};

LoadedConfig load_config(const std::string& path) {
    ncpr::KvConfig kv = ncpr::KvConfig::load_file(path);
    LoadedConfig loaded;
    loaded.env_overrides = kv.apply_env_overrides();
    loaded.config = ncpr::ExperimentConfig::from_kv(kv);
    return loaded;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural co-state projection regulator: experiment runner"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, z0_text, out_dir, inject_fault;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::vector<std::string> controller_tokens;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config file");
        if (needs_config) opt->required();
        cmd->add_option("--out", out_dir, "output directory (overrides out.dir)");
        cmd->add_option("--seed", seed, "seed override")
            ->each([&](const std::string&) { seed_given = true; });
    };

    CLI::App* cmd_train = app.add_subcommand("train", "train a CPNN checkpoint");
    add_common(cmd_train, true);

    CLI::App* cmd_simulate =
        app.add_subcommand("simulate", "run the configured controller closed-loop");
    add_common(cmd_simulate, true);
    cmd_simulate->add_option("--checkpoint", checkpoint_path, "CPNN checkpoint file");
    cmd_simulate->add_option("--z0", z0_text, "initial state override, e.g. 3.14,0");

    CLI::App* cmd_compare =
        app.add_subcommand("compare", "run several controllers on the same cases");
    add_common(cmd_compare, true);
    cmd_compare
        ->add_option("controllers", controller_tokens,
                     "controller tokens: mpc | kind=ckpt | label:kind=ckpt")
        ->required();

    CLI::App* cmd_verify = app.add_subcommand("verify", "run the oracle suites");
    cmd_verify->add_option("--inject-fault", inject_fault,
                           "test hook: corrupt the named suite")
        ->group("");  // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ncpr::RunOverrides overrides;
        if (seed_given) overrides.seed = seed;
        if (!out_dir.empty()) overrides.out_dir = out_dir;
        if (!z0_text.empty()) overrides.z0 = parse_z0(z0_text);

        if (cmd_train->parsed()) {
            const LoadedConfig loaded = load_config(config_path);
            const ncpr::TrainOutputs out =
                ncpr::run_train(loaded.config, config_path, loaded.env_overrides, overrides);
            std::printf("trained %zu epochs, %ld gradient steps, %ld skipped, %.1f s\n",
                        out.report.epoch_mean_loss.size(), out.report.gradient_steps,
                        out.report.skipped, out.report.wall_seconds);
            std::printf("final mean loss %.6g\n", out.report.epoch_mean_loss.back());
            std::printf("checkpoint: %s\n", out.checkpoint.string().c_str());
            return 0;
        }
        if (cmd_simulate->parsed()) {
            const LoadedConfig loaded = load_config(config_path);
            const ncpr::SimulateOutputs out = ncpr::run_simulate(
                loaded.config, config_path, loaded.env_overrides, checkpoint_path, overrides);
            std::printf("convergence error %.6g, msd %.6g, mean latency %.3g ms%s\n",
                        out.summary.convergence_error, out.summary.msd_total,
                        out.summary.latency.mean * 1e3,
                        out.summary.divergent ? " [DIVERGENT]" : "");
            std::printf("trajectory: %s\n", out.trajectory_csv.string().c_str());
            return out.summary.divergent ? 1 : 0;
        }
        if (cmd_compare->parsed()) {
            std::vector<ncpr::ControllerSpec> controllers;
            for (const std::string& token : controller_tokens)
                controllers.push_back(parse_controller_token(token));
            const LoadedConfig loaded = load_config(config_path);
            const ncpr::CompareOutputs out = ncpr::run_compare(
                loaded.config, config_path, loaded.env_overrides, controllers, overrides);
            for (const ncpr::CompareRow& row : out.rows) {
                if (row.divergent)
                    std::printf("%-24s case %-3s DIVERGENT\n", row.controller.c_str(),
                                row.case_label.c_str());
                else
                    std::printf("%-24s case %-3s error %8.4f  msd %8.4f\n",
                                row.controller.c_str(), row.case_label.c_str(),
                                row.error, row.msd);
            }
            std::printf("table: %s\n", out.table_csv.string().c_str());
            return 0;
        }
        if (cmd_verify->parsed()) {
            const ncpr::VerifyReport report = ncpr::run_verify(inject_fault);
            for (const ncpr::VerifySuite& suite : report.suites)
                std::printf("[%s] %-10s observed %.3g  (%s)\n",
                            suite.pass ? "PASS" : "FAIL", suite.name.c_str(),
                            suite.observed, suite.detail.c_str());
            return report.all_pass() ? 0 : 1;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ncpr::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
