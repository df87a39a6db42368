#include "ncpr/loss.hpp"
#include "ncpr/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace ncpr;

namespace {

CostSpec pendulum_spec(int horizon = 20) {
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

CostSpec unicycle_spec(int horizon = 30) {
    CostSpec spec;
    spec.Q = 10.0 * Eigen::MatrixXd::Identity(3, 3);
    spec.R = Eigen::MatrixXd::Identity(2, 2);
    spec.S = 50.0 * spec.Q;
    spec.horizon = horizon;
    spec.dt = 0.05;
    spec.reg = RegKind::Discounted;
    spec.gamma = 0.99;
    return spec;
}

}  // namespace

TEST_CASE("control extraction from prediction rows") {
    ad::Tape t;
    // R = I2, one row [2, -16] -> u = [-1, 8].
    Eigen::VectorXd flat(2);
    flat << 2.0, -16.0;
    std::vector<ad::Var> u = controls_from_prediction(
        t, t.input(Eigen::MatrixXd(flat)), Eigen::MatrixXd::Identity(2, 2), 1, 2);
    REQUIRE(u.size() == 1);
    CHECK(u[0].value()(0, 0) == -1.0);
    CHECK(u[0].value()(1, 0) == 8.0);

    // Scalar R = 2, row [4] -> -1/2 * (1/2) * 4 = -1.
    std::vector<ad::Var> s = controls_from_prediction(
        t, t.input(Eigen::MatrixXd::Constant(1, 1, 4.0)),
        Eigen::MatrixXd::Constant(1, 1, 2.0), 1, 1);
    CHECK(s[0].value()(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));

    // All-zero prediction -> all-zero controls (unicycle R).
    std::vector<ad::Var> z = controls_from_prediction(
        t, t.input(Eigen::MatrixXd::Zero(60, 1)), Eigen::MatrixXd::Identity(2, 2),
        30, 2);
    for (const auto& v : z) CHECK(v.value().cwiseAbs().maxCoeff() == 0.0);

    // Off-tape variant agrees.
    Eigen::MatrixXd pred_m(1, 2);
    pred_m << 2.0, -16.0;
    const Eigen::MatrixXd off =
        controls_from_prediction(ProjectedCostateTrajectory{pred_m},
                                 Eigen::MatrixXd::Identity(2, 2));
    CHECK(off(0, 0) == -1.0);
    CHECK(off(0, 1) == 8.0);
}

TEST_CASE("derived controls satisfy the stationarity equation") {
    // 2*R*u + row = 0 for every horizon step, by construction of the
    // extraction matrix.
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    Eigen::MatrixXd R(2, 2);
    R << 3.0, 0.4, 0.4, 1.5;
    ad::Tape t;
    Eigen::VectorXd flat(8);
    for (int i = 0; i < 8; ++i) flat[i] = dist(rng);
    std::vector<ad::Var> controls =
        controls_from_prediction(t, t.input(Eigen::MatrixXd(flat)), R, 4, 2);
    for (int i = 0; i < 4; ++i) {
        const Eigen::VectorXd u = controls[static_cast<std::size_t>(i)].value();
        const Eigen::VectorXd row = flat.segment(2 * i, 2);
        CHECK((2.0 * R * u + row).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("clamping controls onto the admissible box") {
    ad::Tape t;
    BoxConstraint pend_box = BoxConstraint::uniform(1, -2.0, 2.0);
    std::vector<ad::Var> u{t.input(Eigen::MatrixXd::Constant(1, 1, -3.0))};
    CHECK(clamp_controls(t, u, pend_box)[0].value()(0, 0) == -2.0);

    std::vector<ad::Var> inside{t.input(Eigen::MatrixXd::Constant(1, 1, 0.7))};
    CHECK(clamp_controls(t, inside, pend_box)[0].value()(0, 0) == 0.7);

    BoxConstraint uni_box{Eigen::Vector2d(-1.0, -4.0), Eigen::Vector2d(1.0, 4.0)};
    std::vector<ad::Var> uv{t.input(Eigen::MatrixXd(Eigen::Vector2d(1.5, -8.0)))};
    const Eigen::VectorXd clamped = clamp_controls(t, uv, uni_box)[0].value();
    CHECK(clamped[0] == 1.0);
    CHECK(clamped[1] == -4.0);
}

TEST_CASE("training rollout from the pendulum equilibrium stays at zero") {
    const PendulumModel model;
    ad::Tape t;
    std::vector<ad::Var> controls(5, t.constant(Eigen::MatrixXd::Zero(1, 1)));
    const RolloutResult rollout = training_rollout(
        t, t.constant(Eigen::MatrixXd::Zero(2, 1)), controls, model, 0.05);
    CHECK(rollout.states.size() == 6);
    for (const auto& z : rollout.states)
        CHECK(z.value().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-step rollout reduces to one rk4 step") {
    const PendulumModel model;
    const Eigen::Vector2d z0(0.8, -0.2);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 1.3);
    ad::Tape t;
    const RolloutResult rollout = training_rollout(
        t, t.constant(Eigen::MatrixXd(z0)), {t.constant(Eigen::MatrixXd(u))}, model,
        0.05);
    CHECK(rollout.states.size() == 2);
    CHECK((rollout.states[1].value() - rk4_step(model, z0, u, 0.05))
              .cwiseAbs()
              .maxCoeff() <= 1e-14);
}

TEST_CASE("unicycle straight-line rollout") {
    const UnicycleModel model;
    ad::Tape t;
    const RolloutResult rollout = training_rollout(
        t, t.constant(Eigen::MatrixXd::Zero(3, 1)),
        {t.constant(Eigen::MatrixXd(Eigen::Vector2d(1.0, 0.0)))}, model, 0.05);
    const Eigen::VectorXd z1 = rollout.states[1].value();
    CHECK(z1[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(z1[1] == 0.0);
    CHECK(z1[2] == 0.0);
}

TEST_CASE("stage loss values") {
    const PendulumModel model;
    ad::Tape t;

    // All-zero rollout.
    std::vector<ad::Var> zero_controls(3, t.constant(Eigen::MatrixXd::Zero(1, 1)));
    const RolloutResult zeros = training_rollout(
        t, t.constant(Eigen::MatrixXd::Zero(2, 1)), zero_controls, model, 0.05);
    CHECK(stage_loss(t, zeros, 100.0 * Eigen::MatrixXd::Identity(2, 2),
                     Eigen::MatrixXd::Identity(1, 1))
              .scalar() == 0.0);

    // Single step from z = [1, 0] with u = 0 under Q = diag(100, 100).
    RolloutResult single;
    single.states = {t.constant(Eigen::MatrixXd(Eigen::Vector2d(1.0, 0.0))),
                     t.constant(Eigen::MatrixXd(Eigen::Vector2d(0.9, 0.0)))};
    single.controls = {t.constant(Eigen::MatrixXd::Zero(1, 1))};
    CHECK(stage_loss(t, single, 100.0 * Eigen::MatrixXd::Identity(2, 2),
                     Eigen::MatrixXd::Identity(1, 1))
              .scalar() == 100.0);

    // Two steps against a hand-computed sum.
    RolloutResult two;
    two.states = {t.constant(Eigen::MatrixXd(Eigen::Vector2d(1.0, 2.0))),
                  t.constant(Eigen::MatrixXd(Eigen::Vector2d(0.5, -1.0))),
                  t.constant(Eigen::MatrixXd(Eigen::Vector2d(0.0, 0.0)))};
    two.controls = {t.constant(Eigen::MatrixXd::Constant(1, 1, 2.0)),
                    t.constant(Eigen::MatrixXd::Constant(1, 1, -1.0))};
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd R = Eigen::MatrixXd::Constant(1, 1, 3.0);
    // (1+4) + 3*4 + (0.25+1) + 3*1 = 5 + 12 + 1.25 + 3 = 21.25
    CHECK(stage_loss(t, two, Q, R).scalar() == doctest::Approx(21.25).epsilon(1e-15));
}

TEST_CASE("terminal loss values") {
    ad::Tape t;
    CHECK(terminal_loss(t, t.constant(Eigen::MatrixXd::Zero(3, 1)),
                        500.0 * Eigen::MatrixXd::Identity(3, 3))
              .scalar() == 0.0);
    CHECK(terminal_loss(t, t.constant(Eigen::MatrixXd(Eigen::Vector3d(0.1, 0, 0))),
                        500.0 * Eigen::MatrixXd::Identity(3, 3))
              .scalar() == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(terminal_loss(t, t.constant(Eigen::MatrixXd(Eigen::Vector2d(0.0, 0.2))),
                        1000.0 * Eigen::MatrixXd::Identity(2, 2))
              .scalar() == doctest::Approx(40.0).epsilon(1e-12));
}

TEST_CASE("uniform regularizer is a scaled entrywise 1-norm") {
    ad::Tape t;
    CHECK(reg_uniform(t, t.constant(Eigen::MatrixXd::Zero(4, 1)), 0.1).scalar() == 0.0);

    Eigen::VectorXd flat(4);  // rows [[1,-2],[3,0]] flattened row-major
    flat << 1.0, -2.0, 3.0, 0.0;
    ad::Var pred = t.constant(Eigen::MatrixXd(flat));
    const double value = reg_uniform(t, pred, 0.1).scalar();
    CHECK(value == doctest::Approx(0.6).epsilon(1e-15));

    ad::Var doubled = t.scale(pred, 2.0);
    CHECK(reg_uniform(t, doubled, 0.1).scalar() ==
          doctest::Approx(2.0 * value).epsilon(1e-15));
}

TEST_CASE("discounted regularizer weighs later rows more") {
    ad::Tape t;
    // n = 1: single row of 1-norm 2 picks up gamma^1.
    CHECK(reg_discounted(t, t.constant(Eigen::MatrixXd::Constant(1, 1, 2.0)), 0.99,
                         1, 1)
              .scalar() == doctest::Approx(1.98).epsilon(1e-15));

    // gamma = 1 degenerates to the plain sum of row norms.
    Eigen::VectorXd flat(4);
    flat << 1.0, -1.0, 2.0, 0.5;
    CHECK(reg_discounted(t, t.constant(Eigen::MatrixXd(flat)), 1.0, 2, 2).scalar() ==
          doctest::Approx(4.5).epsilon(1e-15));

    // n = 2, gamma = 0.5, row norms [1, 1]: 0.25 + 0.5.
    Eigen::VectorXd rows(2);
    rows << 1.0, 1.0;
    CHECK(reg_discounted(t, t.constant(Eigen::MatrixXd(rows)), 0.5, 2, 1).scalar() ==
          doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("total loss of a zero-weight net at the origin is zero") {
    const PendulumModel model;
    MlpParams params = mlp_init(2, 20, 1, {8}, 1);
    for (auto& layer : params.layers) {
        layer.W.setZero();
        layer.b.setZero();
    }
    ad::Tape t;
    const LossBreakdown loss =
        total_loss(t, params, Eigen::Vector2d(0.0, 0.0), model, pendulum_spec());
    CHECK(loss.total.scalar() == 0.0);
}

TEST_CASE("components sum to the total bitwise") {
    const UnicycleModel model;
    const MlpParams params = mlp_init(3, 30, 2, {16, 16}, 9);
    ad::Tape t;
    const LossBreakdown loss = total_loss(t, params, Eigen::Vector3d(1.0, -1.5, 0.7),
                                          model, unicycle_spec());
    const double total = loss.total.scalar();
    CHECK(total == (loss.stage.scalar() + loss.terminal.scalar()) + loss.reg.scalar());
    CHECK(total >= 0.0);
}

TEST_CASE("constrained loss clamps the rollout controls") {
    const PendulumModel model;
    const MlpParams params = mlp_init(2, 8, 1, {16}, 31);
    const BoxConstraint box = BoxConstraint::uniform(1, -2.0, 2.0);
    ad::Tape t;
    const LossBreakdown loss =
        total_loss(t, params, Eigen::Vector2d(1.9, -1.2), model, pendulum_spec(8), &box);
    for (const ad::Var& u : loss.rollout.controls) {
        CHECK(u.value()(0, 0) >= -2.0);
        CHECK(u.value()(0, 0) <= 2.0);
    }
}

TEST_CASE("total loss gradient passes the finite-difference oracle") {
    CHECK(oracles::rollout_loss_grad_error(7, 20) <= 1e-5);
}

TEST_CASE("loss is non-negative for PSD weights") {
    const PendulumModel model;
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    const CostSpec spec = pendulum_spec(10);
    for (int i = 0; i < 10; ++i) {
        const MlpParams params = mlp_init(2, 10, 1, {8}, 100 + i);
        ad::Tape t;
        const LossBreakdown loss =
            total_loss(t, params, Eigen::Vector2d(dist(rng), dist(rng)), model, spec);
        CHECK(loss.total.scalar() >= 0.0);
    }
}

TEST_CASE("scaling all weights by two doubles each component exactly") {
    const PendulumModel model;
    const MlpParams params = mlp_init(2, 6, 1, {8}, 3);
    const CostSpec spec = pendulum_spec(6);
    ad::Tape t;
    const LossBreakdown loss =
        total_loss(t, params, Eigen::Vector2d(1.1, 0.4), model, spec);

    // Same rollout and prediction, doubled weights: exact power-of-two scaling.
    const double stage2 = stage_loss(t, loss.rollout, 2.0 * spec.Q, 2.0 * spec.R).scalar();
    const double term2 =
        terminal_loss(t, loss.rollout.states.back(), 2.0 * spec.S).scalar();
    const double reg2 = reg_uniform(t, loss.prediction, 2.0 * spec.beta).scalar();
    CHECK(stage2 == 2.0 * loss.stage.scalar());
    CHECK(term2 == 2.0 * loss.terminal.scalar());
    CHECK(reg2 == 2.0 * loss.reg.scalar());
}

TEST_CASE("mismatched dimensions are rejected") {
    const PendulumModel model;
    const MlpParams wrong = mlp_init(3, 20, 1, {8}, 1);  // p = 3 against a 2-state plant
    ad::Tape t;
    CHECK_THROWS_AS(
        total_loss(t, wrong, Eigen::Vector2d(0, 0), model, pendulum_spec()),
        std::invalid_argument);

    CostSpec bad = pendulum_spec();
    bad.R = -Eigen::MatrixXd::Identity(1, 1);
    CHECK_THROWS_AS(bad.validate(2, 1), std::invalid_argument);
    CostSpec asym = pendulum_spec();
    asym.Q(0, 1) = 1.0;
    CHECK_THROWS_AS(asym.validate(2, 1), std::invalid_argument);
}
