#pragma once

#include "ncpr/config.hpp"
#include "ncpr/io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ncpr {

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<Eigen::VectorXd> z0;
};

struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path curve_csv;
    std::filesystem::path manifest;
    TrainReport report;
};

TrainOutputs run_train(const ExperimentConfig& config, const std::string& config_path,
                       const std::vector<std::string>& env_overrides,
                       const RunOverrides& overrides = {});

struct SimulateOutputs {
    std::filesystem::path trajectory_csv;
    std::filesystem::path summary_json;
    std::filesystem::path manifest;
    SimSummary summary;
};

// Runs the configured controller on the first z0 case (or the override).
// CPNN controllers need a checkpoint; the MPC baseline ignores it.
SimulateOutputs run_simulate(const ExperimentConfig& config, const std::string& config_path,
                             const std::vector<std::string>& env_overrides,
                             const std::string& checkpoint_path,
                             const RunOverrides& overrides = {});

// One controller column of the comparison table: a checkpoint-backed CPNN
// (constrained or not) or the MPC baseline.
struct ControllerSpec {
    std::string kind;             // cpnn_unconstrained | cpnn_constrained | mpc
    std::string checkpoint_path;  // empty for mpc
    std::string label;            // row label; defaults to kind
};

struct CompareOutputs {
    std::filesystem::path table_csv;
    std::filesystem::path manifest;
    std::vector<CompareRow> rows;
};

// Runs every controller on every configured (z0, z_ref) case.
CompareOutputs run_compare(const ExperimentConfig& config, const std::string& config_path,
                           const std::vector<std::string>& env_overrides,
                           const std::vector<ControllerSpec>& controllers,
                           const RunOverrides& overrides = {});

struct VerifySuite {
    std::string name;
    double observed = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifySuite> suites;
    bool all_pass() const {
        for (const auto& s : suites)
            if (!s.pass) return false;
        return true;
    }
};

// Oracle suites: autodiff grad checks, QP grid equivalence, RK4 order, and
// the MSD hand oracle. inject_fault (test hook) corrupts the named suite's
// observable to prove the verifier catches regressions.
VerifyReport run_verify(const std::string& inject_fault = "");

}  // namespace ncpr
