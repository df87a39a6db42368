#include "ncpr/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ncpr {

namespace {

// Shortest round-trippable decimal representation.
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) {
        for (int prec = 1; prec <= 16; ++prec) {
            char shorter[32];
            std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
            std::sscanf(shorter, "%lf", &back);
            if (back == v) return shorter;
        }
    }
    return buf;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    const std::string content = read_text_file(path);
    return fnv1a64(content.data(), content.size());
}

std::string hex64(std::uint64_t value) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("io: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("io: cannot write '" + path.string() + "'");
    out << content;
}

void save_checkpoint_file(const MlpParams& params, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = save_checkpoint(params);
    write_text_file(path, std::string(bytes.begin(), bytes.end()));
}

MlpParams load_checkpoint_file(const std::filesystem::path& path) {
    const std::string content = read_text_file(path);
    return load_checkpoint(reinterpret_cast<const std::uint8_t*>(content.data()),
                           content.size());
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryLog& log) {
    if (log.states.empty()) throw std::invalid_argument("io: empty trajectory log");
    const int p = static_cast<int>(log.states.front().size());
    const int q = log.controls.empty() ? 0 : static_cast<int>(log.controls.front().size());

    std::ostringstream out;
    out << "t";
    for (int i = 1; i <= p; ++i) out << ",z" << i;
    for (int j = 1; j <= q; ++j) out << ",u" << j;
    out << ",stage_cost,latency_s\n";

    for (std::size_t k = 0; k < log.states.size(); ++k) {
        out << fmt(log.times[k]);
        for (int i = 0; i < p; ++i) out << "," << fmt(log.states[k][i]);
        if (k < log.controls.size()) {
            for (int j = 0; j < q; ++j) out << "," << fmt(log.controls[k][j]);
            out << "," << fmt(log.stage_costs[k]) << "," << fmt(log.latencies[k]);
        } else {
            for (int j = 0; j < q + 2; ++j) out << ",";
        }
        out << "\n";
    }
    write_text_file(path, out.str());
}

void write_training_curve_csv(const std::filesystem::path& path,
                              const TrainReport& report) {
    std::ostringstream out;
    out << "epoch,mean_loss,skipped\n";
    for (std::size_t e = 0; e < report.epoch_mean_loss.size(); ++e)
        out << e << "," << fmt(report.epoch_mean_loss[e]) << ","
            << report.epoch_skipped[e] << "\n";
    write_text_file(path, out.str());
}

SimSummary summarize(const TrajectoryLog& log, const Eigen::VectorXd& z_ref) {
    SimSummary s;
    s.convergence_error = convergence_error(log, z_ref);
    s.msd_per_channel = msd_per_channel(log);
    for (double v : s.msd_per_channel) s.msd_total += v;
    s.latency = step_latency_summary(log);
    s.divergent = log.divergent;
    s.steps = log.steps();
    s.final_state = log.states.back();
    return s;
}

void write_summary_json(const std::filesystem::path& path, const SimSummary& s) {
    nlohmann::json j;
    j["convergence_error"] = s.convergence_error;
    j["msd_per_channel"] = s.msd_per_channel;
    j["msd_total"] = s.msd_total;
    j["latency_mean_s"] = s.latency.mean;
    j["latency_p95_s"] = s.latency.p95;
    j["divergent"] = s.divergent;
    j["steps"] = s.steps;
    std::vector<double> final_state(s.final_state.data(),
                                    s.final_state.data() + s.final_state.size());
    j["final_state"] = final_state;
    write_text_file(path, j.dump(2) + "\n");
}

void write_compare_csv(const std::filesystem::path& path,
                       const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "controller,case,status,error,msd\n";
    for (const CompareRow& row : rows) {
        out << row.controller << "," << row.case_label << ","
            << (row.divergent ? "divergent" : "ok") << ",";
        if (!row.divergent) out << fmt(row.error) << "," << fmt(row.msd);
        else out << ",";
        out << "\n";
    }
    write_text_file(path, out.str());
}

void write_manifest_json(const std::filesystem::path& path, const ManifestInfo& info) {
    nlohmann::json j;
    j["command"] = info.command;
    j["config_path"] = info.config_path;
    j["config_fnv1a64"] = hex64(info.config_hash);
    j["seed"] = info.seed;
    if (info.checkpoint) {
        j["checkpoint_path"] = info.checkpoint->first;
        j["checkpoint_fnv1a64"] = hex64(info.checkpoint->second);
    } else {
        j["checkpoint_path"] = nullptr;
    }
    j["env_overrides"] = info.env_overrides;
    j["outputs"] = info.outputs;
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace ncpr
