#include "ncpr/experiment.hpp"

#include "ncpr/mpc.hpp"
#include "ncpr/oracles.hpp"
#include "ncpr/regulator.hpp"

#include <cmath>
#include <stdexcept>

namespace ncpr {

namespace {

namespace fs = std::filesystem;

fs::path resolve_out_dir(const ExperimentConfig& config, const RunOverrides& overrides) {
    fs::path dir = overrides.out_dir ? fs::path(*overrides.out_dir)
                                     : fs::path(config.out_dir);
    fs::create_directories(dir);
    return dir;
}

ManifestInfo base_manifest(const std::string& command, const std::string& config_path,
                           const std::vector<std::string>& env_overrides,
                           std::uint64_t seed) {
    ManifestInfo info;
    info.command = command;
    info.config_path = config_path;
    info.config_hash = fnv1a64_file(config_path);
    info.seed = seed;
    info.env_overrides = env_overrides;
    return info;
}

std::string case_label(std::size_t i) {
    std::string label;
    do {
        label.insert(label.begin(), static_cast<char>('A' + i % 26));
        i /= 26;
    } while (i > 0);
    return label;
}

// Builds the requested controller; CPNN kinds load the checkpoint and take
// the test-time box from the config.
std::unique_ptr<Controller> make_controller(const ExperimentConfig& config,
                                            const PlantModel& model,
                                            const CostSpec& spec,
                                            const std::string& kind,
                                            const std::string& checkpoint_path) {
    if (kind == "mpc") {
        BoxConstraint box = config.test_box ? *config.test_box
                                            : BoxConstraint::unbounded(model.control_dim());
        return std::make_unique<MpcController>(model, spec, box, config.mpc);
    }
    if (checkpoint_path.empty())
        throw std::invalid_argument("controller '" + kind + "' needs a checkpoint");
    MlpParams params = load_checkpoint_file(checkpoint_path);
    if (params.input_dim != model.state_dim() ||
        params.control_dim != model.control_dim())
        throw std::invalid_argument(
            "checkpoint dims (p=" + std::to_string(params.input_dim) +
            ", q=" + std::to_string(params.control_dim) + ") do not match plant '" +
            std::string(model.name()) + "'");
    const BoxConstraint* box = config.box_for_controller(kind);
    return std::make_unique<CpnnController>(
        std::move(params), spec.R,
        box ? std::optional<BoxConstraint>(*box) : std::nullopt);
}

}  // namespace

TrainOutputs run_train(const ExperimentConfig& config, const std::string& config_path,
                       const std::vector<std::string>& env_overrides,
                       const RunOverrides& overrides) {
    const fs::path out_dir = resolve_out_dir(config, overrides);
    const std::uint64_t seed = overrides.seed.value_or(config.seed);

    const std::unique_ptr<PlantModel> model = config.make_plant();
    const CostSpec spec = config.cost_spec();
    TrainConfig train_cfg = config.train_config();
    train_cfg.seed = seed;

    MlpParams init = mlp_init(model->state_dim(), spec.horizon, model->control_dim(),
                              train_cfg.hidden, seed);
    TrainResult result = train(train_cfg, *model, spec, std::move(init));

    TrainOutputs out;
    out.checkpoint = out_dir / "cpnn.ckpt";
    out.curve_csv = out_dir / "training_curve.csv";
    out.manifest = out_dir / "manifest.json";
    out.report = std::move(result.report);

    save_checkpoint_file(result.params, out.checkpoint);
    write_training_curve_csv(out.curve_csv, out.report);

    ManifestInfo manifest = base_manifest("train", config_path, env_overrides, seed);
    manifest.checkpoint = {out.checkpoint.string(), fnv1a64_file(out.checkpoint)};
    manifest.outputs = {out.checkpoint.string(), out.curve_csv.string()};
    write_manifest_json(out.manifest, manifest);
    return out;
}

SimulateOutputs run_simulate(const ExperimentConfig& config, const std::string& config_path,
                             const std::vector<std::string>& env_overrides,
                             const std::string& checkpoint_path,
                             const RunOverrides& overrides) {
    const fs::path out_dir = resolve_out_dir(config, overrides);
    const std::uint64_t seed = overrides.seed.value_or(config.seed);

    const std::unique_ptr<PlantModel> model = config.make_plant();
    const CostSpec spec = config.cost_spec();
    const Eigen::VectorXd z0 = overrides.z0.value_or(config.z0_list.front());
    if (z0.size() != model->state_dim())
        throw std::invalid_argument("simulate: z0 has dim " + std::to_string(z0.size()) +
                                    ", plant expects " +
                                    std::to_string(model->state_dim()));
    const Eigen::VectorXd& z_ref = config.z_ref_for_case(0);

    std::unique_ptr<Controller> controller =
        make_controller(config, *model, spec, config.controller, checkpoint_path);
    const TrajectoryLog log =
        closed_loop(*controller, *model, spec, z0, z_ref, config.duration);

    SimulateOutputs out;
    out.trajectory_csv = out_dir / "trajectory.csv";
    out.summary_json = out_dir / "summary.json";
    out.manifest = out_dir / "manifest.json";
    out.summary = summarize(log, z_ref);

    write_trajectory_csv(out.trajectory_csv, log);
    write_summary_json(out.summary_json, out.summary);

    ManifestInfo manifest = base_manifest("simulate", config_path, env_overrides, seed);
    if (!checkpoint_path.empty())
        manifest.checkpoint = {checkpoint_path, fnv1a64_file(checkpoint_path)};
    manifest.outputs = {out.trajectory_csv.string(), out.summary_json.string()};
    write_manifest_json(out.manifest, manifest);
    return out;
}

CompareOutputs run_compare(const ExperimentConfig& config, const std::string& config_path,
                           const std::vector<std::string>& env_overrides,
                           const std::vector<ControllerSpec>& controllers,
                           const RunOverrides& overrides) {
    if (controllers.empty())
        throw std::invalid_argument("compare: no controllers given");
    const fs::path out_dir = resolve_out_dir(config, overrides);
    const std::uint64_t seed = overrides.seed.value_or(config.seed);

    const std::unique_ptr<PlantModel> model = config.make_plant();
    const CostSpec spec = config.cost_spec();

    CompareOutputs out;
    out.table_csv = out_dir / "compare.csv";
    out.manifest = out_dir / "manifest.json";

    ManifestInfo manifest = base_manifest("compare", config_path, env_overrides, seed);
    for (const ControllerSpec& ctrl : controllers) {
        const std::string label = ctrl.label.empty() ? ctrl.kind : ctrl.label;
        for (std::size_t i = 0; i < config.z0_list.size(); ++i) {
            CompareRow row;
            row.controller = label;
            row.case_label = case_label(i);
            try {
                // Fresh controller per case so MPC warm starts do not leak
                // across cases.
                std::unique_ptr<Controller> controller = make_controller(
                    config, *model, spec, ctrl.kind, ctrl.checkpoint_path);
                const TrajectoryLog log =
                    closed_loop(*controller, *model, spec, config.z0_list[i],
                                config.z_ref_for_case(i), config.duration);
                row.divergent = log.divergent;
                if (!log.divergent) {
                    row.error = convergence_error(log, config.z_ref_for_case(i));
                    row.msd = msd_total(log);
                }
                const fs::path traj = out_dir / ("trajectory_" + label + "_" +
                                                 row.case_label + ".csv");
                write_trajectory_csv(traj, log);
                manifest.outputs.push_back(traj.string());
            } catch (const std::exception&) {
                row.divergent = true;  // row marked divergent, others unaffected
            }
            out.rows.push_back(std::move(row));
        }
        if (!ctrl.checkpoint_path.empty() && !manifest.checkpoint)
            manifest.checkpoint = {ctrl.checkpoint_path,
                                   fnv1a64_file(ctrl.checkpoint_path)};
    }

    write_compare_csv(out.table_csv, out.rows);
    manifest.outputs.push_back(out.table_csv.string());
    write_manifest_json(out.manifest, manifest);
    return out;
}

VerifyReport run_verify(const std::string& inject_fault) {
    VerifyReport report;
    const auto fault = [&](const std::string& suite) {
        return inject_fault == suite ? 1e-3 : 0.0;
    };

    {
        VerifySuite suite;
        suite.name = "autodiff";
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 24; ++s)
            worst = std::max(worst, oracles::random_composition_grad_error(1000 + s));
        worst = std::max(worst, oracles::rollout_loss_grad_error(7, 20));
        suite.observed = worst + fault("autodiff");
        suite.threshold = 1e-5;
        suite.pass = suite.observed <= suite.threshold;
        suite.detail = "max relative gradient error over 24 random compositions "
                       "plus an n=20 pendulum rollout loss";
        report.suites.push_back(std::move(suite));
    }
    {
        VerifySuite suite;
        suite.name = "qp_oracle";
        const oracles::QpOracleResult r = oracles::qp_random_instances(200, 42, 2001);
        suite.observed = std::max({r.max_excess_over_grid, r.max_unexplained_undercut,
                                   r.max_kkt_residual}) + fault("qp_oracle");
        suite.threshold = 1e-6;
        suite.pass = suite.observed <= suite.threshold;
        suite.detail = "200 random box QPs vs a 2001-point/dim grid: worst objective "
                       "gap and KKT residual";
        report.suites.push_back(std::move(suite));
    }
    {
        VerifySuite suite;
        suite.name = "rk4_order";
        const double ratio = oracles::rk4_halving_ratio() + fault("rk4_order") * 1e4;
        suite.observed = ratio;
        suite.threshold = 0.0;  // interval check, reported via pass/detail
        suite.pass = ratio >= 12.0 && ratio <= 20.0;
        suite.detail = "pendulum dt-halving error ratio (expect ~16, accept [12, 20])";
        report.suites.push_back(std::move(suite));
    }
    {
        VerifySuite suite;
        suite.name = "msd";
        suite.observed = oracles::msd_oracle_error() + fault("msd");
        suite.threshold = 1e-12;
        suite.pass = suite.observed <= suite.threshold;
        suite.detail = "msd([0,1,4]) against the hand-computed 14/3";
        report.suites.push_back(std::move(suite));
    }
    return report;
}

}  // namespace ncpr
