#pragma once

#include "ncpr/mlp.hpp"
#include "ncpr/plant.hpp"
#include "ncpr/qp.hpp"
#include "ncpr/tape.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace ncpr {

enum class RegKind { Uniform, Discounted };

// Quadratic cost weights and horizon discretization for one OCP.
struct CostSpec {
    Eigen::MatrixXd Q;   // p x p, PSD symmetric
    Eigen::MatrixXd R;   // q x q, SPD symmetric
    Eigen::MatrixXd S;   // p x p, PSD terminal weight
    int horizon = 0;     // n
    double dt = 0.0;
    RegKind reg = RegKind::Uniform;
    double beta = 0.0;   // uniform regularizer weight
    double gamma = 0.0;  // discount factor
    double reg_scale = 1.0;  // extra multiplier on the regularization term

    void validate(int p, int q) const;  // throws on any violated invariant
};

// States and controls of one differentiable horizon rollout:
// states[0] is the training sample, len(states) == len(controls) + 1.
struct RolloutResult {
    std::vector<ad::Var> states;
    std::vector<ad::Var> controls;
};

// Thrown when a rollout leaves the finite range; the trainer skips the sample.
class SampleDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// u_i = -1/2 R^-1 (prediction row i)^T. The prediction already carries the
// input-gain projection, so no plant evaluation happens here.
std::vector<ad::Var> controls_from_prediction(ad::Tape& tape, ad::Var pred_flat,
                                              const Eigen::MatrixXd& R, int n, int q);
Eigen::MatrixXd controls_from_prediction(const ProjectedCostateTrajectory& pred,
                                         const Eigen::MatrixXd& R);

std::vector<ad::Var> clamp_controls(ad::Tape& tape, const std::vector<ad::Var>& controls,
                                    const BoxConstraint& box);

RolloutResult training_rollout(ad::Tape& tape, ad::Var z0,
                               const std::vector<ad::Var>& controls,
                               const PlantModel& model, double dt);

ad::Var stage_loss(ad::Tape& tape, const RolloutResult& rollout,
                   const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R);
ad::Var terminal_loss(ad::Tape& tape, ad::Var z_final, const Eigen::MatrixXd& S);
ad::Var reg_uniform(ad::Tape& tape, ad::Var pred_flat, double beta);
// Row i of n is weighted by gamma^(n-i): later rows weigh more.
ad::Var reg_discounted(ad::Tape& tape, ad::Var pred_flat, double gamma, int n, int q);

struct LossBreakdown {
    MlpOnTape net;
    ad::Var prediction;  // flat (n*q) x 1
    RolloutResult rollout;
    ad::Var stage, terminal, reg, total;
};

// Full per-sample objective of the training procedure: forward the CPNN,
// derive horizon controls (clamped when a box is given), roll the plant out
// on-tape, and sum stage + terminal + regularization.
LossBreakdown total_loss(ad::Tape& tape, const MlpParams& params,
                         const Eigen::VectorXd& z, const PlantModel& model,
                         const CostSpec& spec, const BoxConstraint* box = nullptr);

// Same objective over parameters already staged on the tape, so callers can
// differentiate w.r.t. leaves they own (gradient checks, shared staging).
LossBreakdown total_loss(ad::Tape& tape, const MlpOnTape& net,
                         const Eigen::VectorXd& z, const PlantModel& model,
                         const CostSpec& spec, const BoxConstraint* box = nullptr);

}  // namespace ncpr
