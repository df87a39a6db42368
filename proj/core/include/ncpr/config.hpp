#pragma once

#include "ncpr/loss.hpp"
#include "ncpr/mpc.hpp"
#include "ncpr/plant.hpp"
#include "ncpr/qp.hpp"
#include "ncpr/trainer.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncpr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat key-value text: one `section.key = value` per line, `#` comments.
// Environment variables override file entries: NCPR_train__epochs=10 sets
// train.epochs (double underscore encodes the dot).
class KvConfig {
public:
    static KvConfig parse(const std::string& text, const std::string& origin);
    static KvConfig load_file(const std::string& path);

    // Returns the keys that were overridden, in application order.
    std::vector<std::string> apply_env_overrides(const std::string& prefix = "NCPR_");

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_numbers(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

// One declarative experiment: plant, cost weights, training recipe,
// controller choice, simulation cases, and output location.
struct ExperimentConfig {
    std::string plant_type;  // "pendulum" | "unicycle"
    double pendulum_mass = 1.0, pendulum_length = 1.0, pendulum_gravity = 9.81;

    Eigen::MatrixXd Q, R, S;
    int horizon = 0;
    double dt = 0.0;
    RegKind reg = RegKind::Uniform;
    double beta = 0.0, gamma = 0.0;

    std::vector<std::array<double, 2>> train_ranges;
    std::vector<int> train_counts;
    int epochs = 0;
    double learning_rate = 0.0;
    bool constrained = false;
    std::optional<BoxConstraint> train_box;
    bool shuffle = false;
    std::vector<int> hidden = {64, 64};

    std::string controller = "cpnn_unconstrained";
    std::optional<BoxConstraint> test_box;  // may differ from the training box

    std::vector<Eigen::VectorXd> z0_list;    // one entry per case
    std::vector<Eigen::VectorXd> z_ref_list; // one entry, or one per case
    double duration = 10.0;

    MpcConfig mpc;

    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";

    static ExperimentConfig from_kv(const KvConfig& kv);
    static ExperimentConfig load_file(const std::string& path);

    std::unique_ptr<PlantModel> make_plant() const;
    CostSpec cost_spec() const;
    TrainConfig train_config() const;
    const Eigen::VectorXd& z_ref_for_case(std::size_t i) const;
    // Box applied at test time for the configured controller kind.
    const BoxConstraint* box_for_controller(const std::string& kind) const;
};

}  // namespace ncpr
