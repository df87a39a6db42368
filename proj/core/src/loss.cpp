#include "ncpr/loss.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace ncpr {

namespace {

void check_symmetric_psd(const Eigen::MatrixXd& m, const char* name, bool strict) {
    if (m.rows() != m.cols())
        throw std::invalid_argument(std::string("cost: ") + name + " is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument(std::string("cost: ") + name + " is not symmetric");
    if (strict) {
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument(std::string("cost: ") + name +
                                        " must be positive definite");
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
        if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
            throw std::invalid_argument(std::string("cost: ") + name +
                                        " must be positive semi-definite");
    }
}

}  // namespace

void CostSpec::validate(int p, int q) const {
    if (Q.rows() != p || R.rows() != q || S.rows() != p)
        throw std::invalid_argument("cost: weight dims do not match the plant");
    check_symmetric_psd(Q, "Q", false);
    check_symmetric_psd(R, "R", true);
    check_symmetric_psd(S, "S", false);
    if (horizon < 1) throw std::invalid_argument("cost: horizon must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("cost: dt must be positive");
    if (reg == RegKind::Uniform && !(beta > 0.0))
        throw std::invalid_argument("cost: uniform regularizer needs beta > 0");
    if (reg == RegKind::Discounted && !(gamma >= 0.0 && gamma <= 1.0))
        throw std::invalid_argument("cost: discount factor must lie in [0, 1]");
    if (!(reg_scale >= 0.0))
        throw std::invalid_argument("cost: regularizer scale must be >= 0");
}

std::vector<ad::Var> controls_from_prediction(ad::Tape& t, ad::Var pred_flat,
                                              const Eigen::MatrixXd& R, int n, int q) {
    if (pred_flat.rows() != n * q || pred_flat.cols() != 1)
        throw std::invalid_argument("controls_from_prediction: prediction is " +
                                    std::to_string(pred_flat.rows()) + "x" +
                                    std::to_string(pred_flat.cols()) + ", expected " +
                                    std::to_string(n * q) + "x1");
    const Eigen::MatrixXd R_inv =
        Eigen::LLT<Eigen::MatrixXd>(R).solve(Eigen::MatrixXd::Identity(q, q));
    std::vector<ad::Var> controls;
    controls.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        // One constant matrix folds row selection and -1/2 R^-1 together.
        Eigen::MatrixXd extract = Eigen::MatrixXd::Zero(q, n * q);
        for (int r = 0; r < q; ++r)
            for (int ccol = 0; ccol < q; ++ccol)
                extract(r, i * q + ccol) = -0.5 * R_inv(r, ccol);
        controls.push_back(t.matvec(t.constant(std::move(extract)), pred_flat));
    }
    return controls;
}

Eigen::MatrixXd controls_from_prediction(const ProjectedCostateTrajectory& pred,
                                         const Eigen::MatrixXd& R) {
    const int n = pred.horizon();
    const int q = pred.control_dim();
    const Eigen::MatrixXd R_inv =
        Eigen::LLT<Eigen::MatrixXd>(R).solve(Eigen::MatrixXd::Identity(q, q));
    Eigen::MatrixXd controls(n, q);
    for (int i = 0; i < n; ++i)
        controls.row(i) = (-0.5 * R_inv * pred.row(i)).transpose();
    return controls;
}

std::vector<ad::Var> clamp_controls(ad::Tape& t, const std::vector<ad::Var>& controls,
                                    const BoxConstraint& box) {
    box.validate();
    std::vector<ad::Var> clamped;
    clamped.reserve(controls.size());
    for (ad::Var u : controls)
        clamped.push_back(t.clamp(u, box.lo, box.hi));
    return clamped;
}

RolloutResult training_rollout(ad::Tape& t, ad::Var z0,
                               const std::vector<ad::Var>& controls,
                               const PlantModel& model, double dt) {
    RolloutResult rollout;
    rollout.states.reserve(controls.size() + 1);
    rollout.controls = controls;
    rollout.states.push_back(z0);
    ad::Var z = z0;
    for (const ad::Var& u : controls) {
        z = rk4_step_on_tape(t, model, z, u, dt);
        if (!z.value().allFinite())
            throw SampleDiverged("training rollout left the finite range at step " +
                                 std::to_string(rollout.states.size()));
        rollout.states.push_back(z);
    }
    return rollout;
}

ad::Var stage_loss(ad::Tape& t, const RolloutResult& rollout,
                   const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    if (rollout.states.size() != rollout.controls.size() + 1)
        throw std::invalid_argument("stage_loss: malformed rollout");
    ad::Var q_mat = t.constant(Q);
    ad::Var r_mat = t.constant(R);
    ad::Var acc;
    for (std::size_t i = 0; i < rollout.controls.size(); ++i) {
        ad::Var z = rollout.states[i];
        ad::Var u = rollout.controls[i];
        ad::Var term = t.add(t.dot(z, t.matvec(q_mat, z)),
                             t.dot(u, t.matvec(r_mat, u)));
        acc = (i == 0) ? term : t.add(acc, term);
    }
    return acc;
}

ad::Var terminal_loss(ad::Tape& t, ad::Var z_final, const Eigen::MatrixXd& S) {
    return t.dot(z_final, t.matvec(t.constant(S), z_final));
}

ad::Var reg_uniform(ad::Tape& t, ad::Var pred_flat, double beta) {
    return t.scale(t.sum(t.abs(pred_flat)), beta);
}

ad::Var reg_discounted(ad::Tape& t, ad::Var pred_flat, double gamma, int n, int q) {
    if (pred_flat.rows() != n * q)
        throw std::invalid_argument("reg_discounted: prediction size mismatch");
    Eigen::VectorXd weights(n * q);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < q; ++j)
            weights[i * q + j] = std::pow(gamma, n - i);
    return t.dot(t.abs(pred_flat), t.constant(Eigen::MatrixXd(weights)));
}

LossBreakdown total_loss(ad::Tape& t, const MlpParams& params,
                         const Eigen::VectorXd& z, const PlantModel& model,
                         const CostSpec& spec, const BoxConstraint* box) {
    if (params.input_dim != model.state_dim() ||
        params.control_dim != model.control_dim() || params.horizon != spec.horizon)
        throw std::invalid_argument("total_loss: network/plant/spec dims disagree");
    return total_loss(t, stage_params(t, params), z, model, spec, box);
}

LossBreakdown total_loss(ad::Tape& t, const MlpOnTape& net,
                         const Eigen::VectorXd& z, const PlantModel& model,
                         const CostSpec& spec, const BoxConstraint* box) {
    spec.validate(model.state_dim(), model.control_dim());

    LossBreakdown out;
    out.net = net;
    ad::Var z0 = t.constant(Eigen::MatrixXd(z));
    out.prediction = cpnn_forward(t, out.net, z0);

    std::vector<ad::Var> controls = controls_from_prediction(
        t, out.prediction, spec.R, spec.horizon, model.control_dim());
    if (box != nullptr) controls = clamp_controls(t, controls, *box);

    out.rollout = training_rollout(t, z0, controls, model, spec.dt);
    out.stage = stage_loss(t, out.rollout, spec.Q, spec.R);
    out.terminal = terminal_loss(t, out.rollout.states.back(), spec.S);
    out.reg = (spec.reg == RegKind::Uniform)
                  ? reg_uniform(t, out.prediction, spec.beta)
                  : reg_discounted(t, out.prediction, spec.gamma, spec.horizon,
                                   model.control_dim());
    if (spec.reg_scale != 1.0) out.reg = t.scale(out.reg, spec.reg_scale);
    out.total = t.add(t.add(out.stage, out.terminal), out.reg);
    return out;
}

}  // namespace ncpr
