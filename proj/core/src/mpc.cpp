#include "ncpr/mpc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ncpr {

namespace {

// Shooting cost of a control sequence, plain arithmetic (no tape).
double shooting_cost(const PlantModel& model, const CostSpec& spec,
                     const Eigen::VectorXd& z0, const Eigen::MatrixXd& seq) {
    Eigen::VectorXd z = z0;
    double cost = 0.0;
    for (int i = 0; i < spec.horizon; ++i) {
        const Eigen::VectorXd u = seq.row(i).transpose();
        cost += z.dot(spec.Q * z) + u.dot(spec.R * u);
        z = rk4_step(model, z, u, spec.dt);
    }
    cost += z.dot(spec.S * z);
    return cost;
}

// Gradient of the shooting cost w.r.t. the flattened sequence (row-major).
Eigen::VectorXd shooting_gradient(const PlantModel& model, const CostSpec& spec,
                                  const Eigen::VectorXd& z0,
                                  const Eigen::MatrixXd& seq, ad::Tape& tape) {
    const int n = spec.horizon;
    const int q = model.control_dim();
    tape.reset();

    Eigen::VectorXd flat(n * q);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < q; ++j) flat[i * q + j] = seq(i, j);
    ad::Var flat_var = tape.input(Eigen::MatrixXd(flat));

    std::vector<ad::Var> controls;
    controls.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(q, n * q);
        for (int j = 0; j < q; ++j) sel(j, i * q + j) = 1.0;
        controls.push_back(tape.matvec(tape.constant(std::move(sel)), flat_var));
    }

    RolloutResult rollout =
        training_rollout(tape, tape.constant(Eigen::MatrixXd(z0)), controls, model, spec.dt);
    ad::Var cost = tape.add(stage_loss(tape, rollout, spec.Q, spec.R),
                            terminal_loss(tape, rollout.states.back(), spec.S));
    tape.backward(cost);
    return Eigen::VectorXd(tape.grad(flat_var));
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, int n, int q) {
    Eigen::MatrixXd seq(n, q);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < q; ++j) seq(i, j) = flat[i * q + j];
    return seq;
}

Eigen::MatrixXd project_rows(const Eigen::MatrixXd& seq, const BoxConstraint& box) {
    Eigen::MatrixXd out = seq;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        out.row(i) = box.clamp(out.row(i).transpose()).transpose();
    return out;
}

}  // namespace

Eigen::MatrixXd mpc_solve(const PlantModel& model, const CostSpec& spec,
                          const BoxConstraint& box, const Eigen::VectorXd& z,
                          const MpcConfig& config, const Eigen::MatrixXd* warm,
                          MpcSolveStats* stats) {
    const int n = spec.horizon;
    const int q = model.control_dim();
    spec.validate(model.state_dim(), q);
    box.validate();
    if (z.size() != model.state_dim())
        throw std::invalid_argument("mpc_solve: state dim mismatch");
    if (warm != nullptr && (warm->rows() != n || warm->cols() != q))
        throw std::invalid_argument("mpc_solve: warm start has wrong shape");

    Eigen::MatrixXd seq = (warm != nullptr)
                              ? project_rows(*warm, box)
                              : project_rows(Eigen::MatrixXd::Zero(n, q), box);

    double cost = shooting_cost(model, spec, z, seq);
    if (!std::isfinite(cost)) {
        // One reset to zeros, then give up.
        seq = project_rows(Eigen::MatrixXd::Zero(n, q), box);
        cost = shooting_cost(model, spec, z, seq);
        if (!std::isfinite(cost))
            throw std::runtime_error("mpc_solve: non-finite cost from the zero sequence");
    }

    MpcSolveStats local;
    local.initial_cost = cost;
    local.cost_trace.push_back(cost);

    ad::Tape tape;
    Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(n * q);
    Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(n * q);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    bool converged = false;
    for (int iter = 0; iter < config.max_iters && !converged; ++iter) {
        const Eigen::VectorXd grad = shooting_gradient(model, spec, z, seq, tape);
        if (!grad.allFinite())
            throw std::runtime_error("mpc_solve: non-finite gradient");

        const double t = static_cast<double>(iter + 1);
        adam_m = beta1 * adam_m + (1.0 - beta1) * grad;
        adam_v = beta2 * adam_v + (1.0 - beta2) * grad.cwiseProduct(grad);
        const Eigen::ArrayXd m_hat = adam_m.array() / (1.0 - std::pow(beta1, t));
        const Eigen::ArrayXd v_hat = adam_v.array() / (1.0 - std::pow(beta2, t));
        const Eigen::VectorXd direction =
            (config.step_size * m_hat / (v_hat.sqrt() + eps)).matrix();

        Eigen::VectorXd flat(n * q);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < q; ++j) flat[i * q + j] = seq(i, j);

        // Backtracking acceptance keeps the objective non-increasing.
        double shrink = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 16; ++bt, shrink *= 0.5) {
            const Eigen::MatrixXd candidate =
                project_rows(unflatten(flat - shrink * direction, n, q), box);
            const double candidate_cost = shooting_cost(model, spec, z, candidate);
            if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
                converged = (cost - candidate_cost) < config.tolerance;
                seq = candidate;
                cost = candidate_cost;
                accepted = true;
                ++local.iterations;
                local.cost_trace.push_back(cost);
                break;
            }
        }
        if (!accepted) break;  // no feasible decrease along this direction
    }

    local.final_cost = cost;
    if (stats != nullptr) *stats = local;
    return seq;
}

MpcController::MpcController(const PlantModel& model, CostSpec spec,
                             BoxConstraint box, MpcConfig config)
    : model_(model), spec_(std::move(spec)), box_(std::move(box)),
      config_(config) {
    spec_.horizon = config_.horizon;
    spec_.validate(model_.state_dim(), model_.control_dim());
    box_.validate();
}

Eigen::VectorXd MpcController::act(const Eigen::VectorXd& error_state) {
    MpcSolveStats stats;
    const Eigen::MatrixXd* warm =
        (config_.warm_start && have_warm_) ? &warm_ : nullptr;
    const Eigen::MatrixXd seq =
        mpc_solve(model_, spec_, box_, error_state, config_, warm, &stats);
    history_.push_back(stats);

    if (config_.warm_start) {
        warm_ = Eigen::MatrixXd(seq.rows(), seq.cols());
        warm_.topRows(seq.rows() - 1) = seq.bottomRows(seq.rows() - 1);
        warm_.row(seq.rows() - 1) = seq.row(seq.rows() - 1);
        have_warm_ = true;
    }
    return seq.row(0).transpose();
}

}  // namespace ncpr
