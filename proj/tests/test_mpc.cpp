#include "ncpr/mpc.hpp"

#include <doctest.h>

#include <cmath>

using namespace ncpr;

namespace {

// zdot = u: RK4 advances exactly by dt * u, which keeps oracles closed-form.
class ScalarIntegrator final : public PlantModel {
public:
    int state_dim() const override { return 1; }
    int control_dim() const override { return 1; }
    std::string_view name() const override { return "scalar_integrator"; }
    Eigen::VectorXd drift(const Eigen::VectorXd&) const override {
        return Eigen::VectorXd::Zero(1);
    }
    Eigen::MatrixXd input_gain(const Eigen::VectorXd&) const override {
        return Eigen::MatrixXd::Identity(1, 1);
    }
    ad::Var dynamics_on_tape(ad::Tape& t, ad::Var, ad::Var u) const override {
        return t.scale(u, 1.0);
    }
};

CostSpec integrator_spec() {
    CostSpec spec;
    spec.Q = Eigen::MatrixXd::Identity(1, 1);
    spec.R = Eigen::MatrixXd::Identity(1, 1);
    spec.S = Eigen::MatrixXd::Zero(1, 1);
    spec.horizon = 2;
    spec.dt = 0.1;
    spec.reg = RegKind::Uniform;
    spec.beta = 0.1;  // unused by the MPC objective
    return spec;
}

CostSpec pendulum_spec(int horizon) {
    CostSpec spec;
    spec.Q = 100.0 * Eigen::MatrixXd::Identity(2, 2);
    spec.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
    spec.S = 10.0 * spec.Q;
    spec.horizon = horizon;
    spec.dt = 0.05;
    spec.reg = RegKind::Uniform;
    spec.beta = 0.1;
    return spec;
}

double integrator_cost(double z0, double dt, double u0, double u1) {
    const double z1 = z0 + dt * u0;
    const double z2 = z1 + dt * u1;
    (void)z2;  // S = 0: the terminal state carries no cost
    return z0 * z0 + u0 * u0 + z1 * z1 + u1 * u1;
}

}  // namespace

TEST_CASE("regulated fixed point solves to a near-zero sequence") {
    const ScalarIntegrator model;
    const CostSpec spec = integrator_spec();
    MpcConfig config;
    config.horizon = 2;
    MpcSolveStats stats;
    const Eigen::MatrixXd seq =
        mpc_solve(model, spec, BoxConstraint::uniform(1, -5.0, 5.0),
                  Eigen::VectorXd::Zero(1), config, nullptr, &stats);
    CHECK(seq.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(stats.final_cost <= 1e-12);
}

TEST_CASE("scalar integrator matches the dense-grid oracle") {
    const ScalarIntegrator model;
    const CostSpec spec = integrator_spec();
    MpcConfig config;
    config.horizon = 2;
    config.max_iters = 2000;
    config.tolerance = 1e-14;

    const Eigen::VectorXd z0 = Eigen::VectorXd::Constant(1, 1.0);
    MpcSolveStats stats;
    const Eigen::MatrixXd seq =
        mpc_solve(model, spec, BoxConstraint::uniform(1, -1.0, 1.0), z0, config,
                  nullptr, &stats);
    const double solver_cost = integrator_cost(1.0, spec.dt, seq(0, 0), seq(1, 0));

    double grid_cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2000; ++i) {
        const double u0 = -1.0 + 2.0 * i / 2000.0;
        for (int j = 0; j <= 2000; ++j) {
            const double u1 = -1.0 + 2.0 * j / 2000.0;
            grid_cost = std::min(grid_cost, integrator_cost(1.0, spec.dt, u0, u1));
        }
    }
    CHECK(std::abs(solver_cost - grid_cost) <= 1e-4);

    // Closed form: u1* = 0, u0* = -0.2/2.02. The objective is nearly flat
    // (curvature ~2), so the argmin check is a loose sanity bound; the
    // cost-gap check above is the oracle.
    CHECK(seq(0, 0) == doctest::Approx(-0.2 / 2.02).epsilon(0.15));
    CHECK(std::abs(seq(1, 0)) <= 0.02);
}

TEST_CASE("inner-loop cost trace is non-increasing") {
    const PendulumModel model;
    const CostSpec spec = pendulum_spec(10);
    MpcConfig config;
    config.horizon = 10;
    MpcSolveStats stats;
    mpc_solve(model, spec, BoxConstraint::uniform(1, -10.0, 10.0),
              Eigen::Vector2d(2.0, 0.0), config, nullptr, &stats);
    CHECK(stats.monotone());
    CHECK(stats.cost_trace.size() >= 2);
    CHECK(stats.final_cost < stats.initial_cost);
}

TEST_CASE("returned controls satisfy the box exactly") {
    const PendulumModel model;
    const CostSpec spec = pendulum_spec(10);
    MpcConfig config;
    config.horizon = 10;
    const BoxConstraint box = BoxConstraint::uniform(1, -2.0, 2.0);
    const Eigen::MatrixXd seq =
        mpc_solve(model, spec, box, Eigen::Vector2d(3.0, 0.0), config);
    for (Eigen::Index i = 0; i < seq.rows(); ++i) {
        CHECK(seq(i, 0) >= -2.0);
        CHECK(seq(i, 0) <= 2.0);
    }
}

TEST_CASE("controller applies the first element of a fresh solve") {
    const PendulumModel model;
    const CostSpec spec = pendulum_spec(10);
    MpcConfig config;
    config.horizon = 10;
    const BoxConstraint box = BoxConstraint::uniform(1, -10.0, 10.0);

    MpcController controller(model, spec, box, config);
    const Eigen::Vector2d state(1.2, -0.4);
    const Eigen::VectorXd u = controller.act(state);
    const Eigen::MatrixXd direct = mpc_solve(model, spec, box, state, config);
    CHECK(u[0] == direct(0, 0));
}

TEST_CASE("warm starts cut the inner iteration count") {
    const PendulumModel model;
    const CostSpec spec = pendulum_spec(10);
    const BoxConstraint box = BoxConstraint::uniform(1, -10.0, 10.0);

    auto total_iterations = [&](bool warm) {
        MpcConfig config;
        config.horizon = 10;
        config.warm_start = warm;
        MpcController controller(model, spec, box, config);
        closed_loop(controller, model, spec, Eigen::Vector2d(1.5, 0.0),
                    Eigen::Vector2d::Zero(), 0.5);
        long total = 0;
        // Step 1 solves cold either way; compare the steps after it.
        for (std::size_t i = 1; i < controller.history().size(); ++i)
            total += controller.history()[i].iterations;
        return total;
    };
    CHECK(total_iterations(true) < total_iterations(false));
}

TEST_CASE("mpc closed loop pulls the pendulum toward the target") {
    const PendulumModel model;
    CostSpec spec = pendulum_spec(10);
    MpcConfig config;
    config.horizon = 10;
    MpcController controller(model, spec, BoxConstraint::uniform(1, -10.0, 10.0),
                             config);
    const TrajectoryLog log = closed_loop(controller, model, spec,
                                          Eigen::Vector2d(1.0, 0.0),
                                          Eigen::Vector2d::Zero(), 2.0);
    CHECK_FALSE(log.divergent);
    CHECK(convergence_error(log, Eigen::Vector2d::Zero()) < 0.5);
}
