#pragma once

#include "ncpr/loss.hpp"
#include "ncpr/plant.hpp"
#include "ncpr/qp.hpp"
#include "ncpr/regulator.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ncpr {

struct MpcConfig {
    int horizon = 30;
    int max_iters = 300;
    double step_size = 0.05;
    double tolerance = 1e-8;   // stop once the cost decrease falls below this
    bool warm_start = true;
};

struct MpcSolveStats {
    int iterations = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    std::vector<double> cost_trace;  // initial cost, then one entry per accepted iteration
    bool monotone() const {
        for (std::size_t i = 1; i < cost_trace.size(); ++i)
            if (cost_trace[i] > cost_trace[i - 1]) return false;
        return true;
    }
};

// Receding-horizon single-shooting solve: minimize the discretized quadratic
// cost over an n-step control sequence by projected gradient descent (Adam
// direction with backtracking acceptance; projection clamps each channel
// onto the box after every update). Returns the n x q sequence.
Eigen::MatrixXd mpc_solve(const PlantModel& model, const CostSpec& spec,
                          const BoxConstraint& box, const Eigen::VectorXd& z,
                          const MpcConfig& config,
                          const Eigen::MatrixXd* warm = nullptr,
                          MpcSolveStats* stats = nullptr);

// Adapter for the closed loop: re-solves each step and applies element 0.
// Warm start shifts the previous solution by one, repeating the last row.
class MpcController final : public Controller {
public:
    MpcController(const PlantModel& model, CostSpec spec, BoxConstraint box,
                  MpcConfig config);

    Eigen::VectorXd act(const Eigen::VectorXd& error_state) override;
    std::string_view name() const override { return "mpc"; }
    const BoxConstraint* active_box() const override { return &box_; }

    const std::vector<MpcSolveStats>& history() const { return history_; }

private:
    const PlantModel& model_;
    CostSpec spec_;
    BoxConstraint box_;
    MpcConfig config_;
    Eigen::MatrixXd warm_;
    bool have_warm_ = false;
    std::vector<MpcSolveStats> history_;
};

}  // namespace ncpr
