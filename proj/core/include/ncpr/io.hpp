#pragma once

#include "ncpr/mlp.hpp"
#include "ncpr/regulator.hpp"
#include "ncpr/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ncpr {

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

void save_checkpoint_file(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint_file(const std::filesystem::path& path);

// Columns: t,z1..zp,u1..uq,stage_cost,latency_s. The final row carries the
// terminal state with empty control columns.
void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryLog& log);

// Columns: epoch,mean_loss,skipped.
void write_training_curve_csv(const std::filesystem::path& path, const TrainReport& report);

struct SimSummary {
    double convergence_error = 0.0;
    std::vector<double> msd_per_channel;
    double msd_total = 0.0;
    LatencyStats latency;
    bool divergent = false;
    int steps = 0;
    Eigen::VectorXd final_state;
};

SimSummary summarize(const TrajectoryLog& log, const Eigen::VectorXd& z_ref);
void write_summary_json(const std::filesystem::path& path, const SimSummary& summary);

// Columns: controller,case,status,error,msd (numeric cells empty when divergent).
struct CompareRow {
    std::string controller;
    std::string case_label;
    bool divergent = false;
    double error = 0.0;
    double msd = 0.0;
};
void write_compare_csv(const std::filesystem::path& path,
                       const std::vector<CompareRow>& rows);

// Reproducibility record: config and checkpoint content hashes, the seed,
// applied environment overrides, and every file the run wrote.
struct ManifestInfo {
    std::string command;
    std::string config_path;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::optional<std::pair<std::string, std::uint64_t>> checkpoint;
    std::vector<std::string> env_overrides;
    std::vector<std::string> outputs;
};
void write_manifest_json(const std::filesystem::path& path, const ManifestInfo& info);

}  // namespace ncpr
