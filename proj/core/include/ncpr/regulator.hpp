#pragma once

#include "ncpr/loss.hpp"
#include "ncpr/mlp.hpp"
#include "ncpr/plant.hpp"
#include "ncpr/qp.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <vector>

namespace ncpr {

struct ReferenceSpec {
    Eigen::VectorXd z_ref;  // constant reference state
};

// Time-indexed record of one closed-loop run. times and states have one more
// entry than controls; latencies cover the controller computation only
// (prediction + control extraction, integration excluded).
struct TrajectoryLog {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> controls;
    std::vector<double> stage_costs;            // error-state stage cost per step
    std::vector<double> latencies;              // seconds per step
    std::vector<Eigen::VectorXd> costate_rows;  // first prediction row (CPNN only)
    bool divergent = false;

    int steps() const { return static_cast<int>(controls.size()); }
};

// Feedback policy: maps the error state to one control.
class Controller {
public:
    virtual ~Controller() = default;
    virtual Eigen::VectorXd act(const Eigen::VectorXd& error_state) = 0;
    virtual std::string_view name() const = 0;
    virtual const BoxConstraint* active_box() const { return nullptr; }
    // Populated after act() by controllers that expose their linear term.
    virtual const Eigen::VectorXd* last_costate_row() const { return nullptr; }
};

// CPNN + control extraction. Holds no plant knowledge: the network output
// already carries the input-gain projection.
class CpnnController final : public Controller {
public:
    CpnnController(MlpParams params, Eigen::MatrixXd R,
                   std::optional<BoxConstraint> box);

    Eigen::VectorXd act(const Eigen::VectorXd& error_state) override;
    std::string_view name() const override {
        return box_ ? "cpnn_constrained" : "cpnn_unconstrained";
    }
    const BoxConstraint* active_box() const override {
        return box_ ? &*box_ : nullptr;
    }
    const Eigen::VectorXd* last_costate_row() const override { return &last_row_; }

    const MlpParams& params() const { return params_; }

private:
    MlpParams params_;
    Eigen::MatrixXd R_;
    std::optional<BoxConstraint> box_;
    Eigen::VectorXd last_row_;
};

// Run the feedback loop for duration T (a positive multiple of spec.dt):
// error state into the controller, one RK4 step per control, everything
// logged. A non-finite state terminates the run and marks the log divergent.
TrajectoryLog closed_loop(Controller& controller, const PlantModel& model,
                          const CostSpec& spec, const Eigen::VectorXd& z0,
                          const Eigen::VectorXd& z_ref, double duration);

// Convenience overload wiring up the CPNN controller.
TrajectoryLog closed_loop(const MlpParams& params, const PlantModel& model,
                          const CostSpec& spec, const BoxConstraint* box,
                          const Eigen::VectorXd& z0, const Eigen::VectorXd& z_ref,
                          double duration);

// Sum of absolute per-state tracking error at the final logged state.
double convergence_error(const TrajectoryLog& log, const Eigen::VectorXd& z_ref);

// Mean squared derivative of one control channel: numerical gradient at unit
// sample spacing (central differences inside, one-sided at the ends), then
// the mean of its squares.
double msd(const std::vector<double>& series);
std::vector<double> msd_per_channel(const TrajectoryLog& log);
double msd_total(const TrajectoryLog& log);

struct LatencyStats {
    double mean = 0.0;
    double p95 = 0.0;
};
LatencyStats step_latency_summary(const TrajectoryLog& log);

}  // namespace ncpr
