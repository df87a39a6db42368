#include "ncpr/oracles.hpp"
#include "ncpr/plant.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ncpr;

namespace {

// Degenerate scalar plant zdot = -z + u, for closed-form integrator checks.
class LinearDecayModel final : public PlantModel {
public:
    int state_dim() const override { return 1; }
    int control_dim() const override { return 1; }
    std::string_view name() const override { return "linear_decay"; }
    Eigen::VectorXd drift(const Eigen::VectorXd& z) const override { return -z; }
    Eigen::MatrixXd input_gain(const Eigen::VectorXd&) const override {
        return Eigen::MatrixXd::Identity(1, 1);
    }
    ad::Var dynamics_on_tape(ad::Tape& t, ad::Var z, ad::Var u) const override {
        return t.add(t.scale(z, -1.0), u);
    }
};

Eigen::VectorXd euler_reference(const PlantModel& model, Eigen::VectorXd z,
                                const Eigen::VectorXd& u, double dt, double duration) {
    const long steps = std::lround(duration / dt);
    for (long k = 0; k < steps; ++k) z += dt * model.dynamics(z, u);
    return z;
}

}  // namespace

TEST_CASE("pendulum equilibrium stays put") {
    const PendulumModel pendulum;
    const Eigen::Vector2d z(0.0, 0.0);
    const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
    CHECK(pendulum.dynamics(z, u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((rk4_step(pendulum, z, u, 0.05) - z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pendulum horizontal release accelerates at -g") {
    const PendulumModel pendulum(1.0, 1.0, 9.81);
    const Eigen::Vector2d z(M_PI / 2.0, 0.0);
    const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd zdot = pendulum.dynamics(z, u);
    CHECK(zdot[0] == 0.0);
    CHECK(zdot[1] == doctest::Approx(-9.81).epsilon(1e-12));
}

TEST_CASE("unicycle drives straight along x at zero heading") {
    const UnicycleModel unicycle;
    const Eigen::Vector3d z(0.0, 0.0, 0.0);
    const Eigen::Vector2d u(1.0, 0.0);
    const Eigen::VectorXd zdot = unicycle.dynamics(z, u);
    CHECK(zdot[0] == 1.0);
    CHECK(zdot[1] == 0.0);
    CHECK(zdot[2] == 0.0);
}

TEST_CASE("input gain columns at canonical headings") {
    const UnicycleModel unicycle;
    Eigen::MatrixXd g0 = unicycle.input_gain(Eigen::Vector3d(0, 0, 0));
    CHECK(g0(0, 0) == 1.0);
    CHECK(g0(1, 0) == 0.0);
    CHECK(g0(2, 1) == 1.0);

    Eigen::MatrixXd g90 = unicycle.input_gain(Eigen::Vector3d(0, 0, M_PI / 2.0));
    CHECK(g90(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(g90(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g90(2, 1) == 1.0);

    const PendulumModel pendulum;
    Eigen::MatrixXd gp = pendulum.input_gain(Eigen::Vector2d(0.3, -1.0));
    CHECK(gp(0, 0) == 0.0);
    CHECK(gp(1, 0) == 1.0);  // 1/(m l^2) with m = l = 1
}

TEST_CASE("rk4 matches the closed-form exponential") {
    const LinearDecayModel model;
    Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 1.0);
    const Eigen::VectorXd u = Eigen::VectorXd::Zero(1);
    z = rk4_step(model, z, u, 0.1);
    CHECK(z[0] == doctest::Approx(std::exp(-0.1)).epsilon(1e-7));
}

TEST_CASE("rk4 halving ratio sits at fourth order") {
    const double ratio = oracles::rk4_halving_ratio();
    const double order = std::log2(ratio);
    CHECK(order >= 3.5);
    CHECK(order <= 4.5);
}

TEST_CASE("rk4 against a fine-step Euler reference") {
    // The Euler reference at dt = 1e-5 carries its own O(dt) error, so the
    // scenario keeps RK4 truncation well above it: dt = 0.2 on a swinging
    // pendulum leaves halved-step error ~3e-4 against a ~1.6e-4 reference gap.
    const PendulumModel pendulum;
    const Eigen::Vector2d z0(2.5, 0.0);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.3);
    const double duration = 1.0;
    const Eigen::VectorXd reference = euler_reference(pendulum, z0, u, 1e-5, duration);

    auto rk4_endpoint = [&](double dt) {
        Eigen::VectorXd z = z0;
        const long steps = std::lround(duration / dt);
        for (long k = 0; k < steps; ++k) z = rk4_step(pendulum, z, u, dt);
        return z;
    };
    const double coarse = (rk4_endpoint(0.2) - reference).norm();
    const double fine = (rk4_endpoint(0.1) - reference).norm();
    const double order = std::log2(coarse / fine);
    CHECK(order >= 3.5);
    CHECK(order <= 4.5);
}

TEST_CASE("dynamics are exactly affine in the control") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const UnicycleModel unicycle;
    const PendulumModel pendulum;

    for (int i = 0; i < 50; ++i) {
        const Eigen::Vector3d z3(u(rng), u(rng), u(rng));
        const Eigen::Vector2d u1(u(rng), u(rng));
        const Eigen::Vector2d u2(u(rng), u(rng));
        // Rearranged affinity identity, exact because both sides evaluate
        // drift + gain*u through the same expression.
        const Eigen::VectorXd lhs = unicycle.dynamics(z3, u1 + u2) + unicycle.drift(z3);
        const Eigen::VectorXd rhs = unicycle.dynamics(z3, u1) + unicycle.dynamics(z3, u2);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

        // Gain consistency, bitwise in its rearranged form.
        const Eigen::VectorXd via_gain =
            unicycle.dynamics(z3, Eigen::Vector2d::Zero()) + unicycle.input_gain(z3) * u1;
        CHECK((unicycle.dynamics(z3, u1) - via_gain).cwiseAbs().maxCoeff() == 0.0);

        const Eigen::Vector2d z2(u(rng), u(rng));
        const Eigen::VectorXd uu = Eigen::VectorXd::Constant(1, u(rng));
        const Eigen::VectorXd via_gain_p =
            pendulum.dynamics(z2, Eigen::VectorXd::Zero(1)) + pendulum.input_gain(z2) * uu;
        CHECK((pendulum.dynamics(z2, uu) - via_gain_p).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("on-tape dynamics agree with the plain path") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    const UnicycleModel unicycle;
    const PendulumModel pendulum;

    for (int i = 0; i < 20; ++i) {
        const Eigen::Vector3d z3(dist(rng), dist(rng), dist(rng));
        const Eigen::Vector2d u2(dist(rng), dist(rng));
        ad::Tape t;
        ad::Var zt = t.constant(Eigen::MatrixXd(z3));
        ad::Var ut = t.constant(Eigen::MatrixXd(u2));
        const Eigen::VectorXd on_tape =
            rk4_step_on_tape(t, unicycle, zt, ut, 0.05).value();
        const Eigen::VectorXd plain = rk4_step(unicycle, z3, u2, 0.05);
        CHECK((on_tape - plain).cwiseAbs().maxCoeff() <= 1e-14);

        const Eigen::Vector2d z2(dist(rng), dist(rng));
        const Eigen::VectorXd u1 = Eigen::VectorXd::Constant(1, dist(rng));
        ad::Tape t2;
        const Eigen::VectorXd on_tape_p =
            rk4_step_on_tape(t2, pendulum, t2.constant(Eigen::MatrixXd(z2)),
                             t2.constant(Eigen::MatrixXd(u1)), 0.05)
                .value();
        CHECK((on_tape_p - rk4_step(pendulum, z2, u1, 0.05)).cwiseAbs().maxCoeff()
              <= 1e-14);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    const PendulumModel pendulum;
    CHECK_THROWS_AS(pendulum.dynamics(Eigen::Vector3d(0, 0, 0), Eigen::VectorXd::Zero(1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(pendulum.dynamics(Eigen::Vector2d(0, 0), Eigen::VectorXd::Zero(2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(rk4_step(pendulum, Eigen::Vector2d(0, 0), Eigen::VectorXd::Zero(1), 0.0),
                    std::invalid_argument);
}
