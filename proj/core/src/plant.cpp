#include "ncpr/plant.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ncpr {

void PlantModel::check_dims(const Eigen::VectorXd& z, const Eigen::VectorXd* u) const {
    if (z.size() != state_dim())
        throw std::invalid_argument(std::string(name()) + ": state has dim " +
                                    std::to_string(z.size()) + ", expected " +
                                    std::to_string(state_dim()));
    if (u != nullptr && u->size() != control_dim())
        throw std::invalid_argument(std::string(name()) + ": control has dim " +
                                    std::to_string(u->size()) + ", expected " +
                                    std::to_string(control_dim()));
}

Eigen::VectorXd PlantModel::dynamics(const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& u) const {
    check_dims(z, &u);
    return drift(z) + input_gain(z) * u;
}

// ---- unicycle ----

Eigen::VectorXd UnicycleModel::drift(const Eigen::VectorXd& z) const {
    check_dims(z, nullptr);
    return Eigen::VectorXd::Zero(3);
}

Eigen::MatrixXd UnicycleModel::input_gain(const Eigen::VectorXd& z) const {
    check_dims(z, nullptr);
    Eigen::MatrixXd g(3, 2);
    g << std::cos(z[2]), 0.0,
         std::sin(z[2]), 0.0,
         0.0,            1.0;
    return g;
}

ad::Var UnicycleModel::dynamics_on_tape(ad::Tape& t, ad::Var z, ad::Var u) const {
    if (z.rows() != 3 || z.cols() != 1 || u.rows() != 2 || u.cols() != 1)
        throw std::invalid_argument("unicycle: on-tape dims must be 3x1 state, 2x1 control");
    ad::Var e1 = t.constant(Eigen::Vector3d(1, 0, 0));
    ad::Var e2 = t.constant(Eigen::Vector3d(0, 1, 0));
    ad::Var e3 = t.constant(Eigen::Vector3d(0, 0, 1));
    ad::Var theta = t.dot(z, e3);
    ad::Var v = t.dot(u, t.constant(Eigen::Vector2d(1, 0)));
    ad::Var w = t.dot(u, t.constant(Eigen::Vector2d(0, 1)));
    ad::Var vx = t.mul(v, t.cos(theta));
    ad::Var vy = t.mul(v, t.sin(theta));
    return t.add(t.add(t.mul(vx, e1), t.mul(vy, e2)), t.mul(w, e3));
}

// ---- pendulum ----

PendulumModel::PendulumModel(double mass, double length, double gravity)
    : mass_(mass), length_(length), gravity_(gravity),
      gravity_coeff_(-gravity / length), gain_coeff_(1.0 / (mass * length * length)) {
    if (mass <= 0.0 || length <= 0.0)
        throw std::invalid_argument("pendulum: mass and length must be positive");
}

Eigen::VectorXd PendulumModel::drift(const Eigen::VectorXd& z) const {
    check_dims(z, nullptr);
    return Eigen::Vector2d(z[1], gravity_coeff_ * std::sin(z[0]));
}

Eigen::MatrixXd PendulumModel::input_gain(const Eigen::VectorXd& z) const {
    check_dims(z, nullptr);
    return Eigen::Vector2d(0.0, gain_coeff_);
}

ad::Var PendulumModel::dynamics_on_tape(ad::Tape& t, ad::Var z, ad::Var u) const {
    if (z.rows() != 2 || z.cols() != 1 || u.rows() != 1 || u.cols() != 1)
        throw std::invalid_argument("pendulum: on-tape dims must be 2x1 state, 1x1 control");
    ad::Var e1 = t.constant(Eigen::Vector2d(1, 0));
    ad::Var e2 = t.constant(Eigen::Vector2d(0, 1));
    ad::Var theta = t.dot(z, e1);
    ad::Var thetadot = t.dot(z, e2);
    ad::Var accel_gravity = t.scale(t.sin(theta), gravity_coeff_);
    ad::Var accel_torque = t.scale(u, gain_coeff_);
    return t.add(t.add(t.mul(thetadot, e1), t.mul(accel_gravity, e2)),
                 t.mul(accel_torque, e2));
}

// ---- RK4 ----

Eigen::VectorXd rk4_step(const PlantModel& model, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& u, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("rk4_step: dt must be positive");
    const Eigen::VectorXd k1 = model.dynamics(z, u);
    const Eigen::VectorXd k2 = model.dynamics(z + (0.5 * dt) * k1, u);
    const Eigen::VectorXd k3 = model.dynamics(z + (0.5 * dt) * k2, u);
    const Eigen::VectorXd k4 = model.dynamics(z + dt * k3, u);
    return z + (dt / 6.0) * ((k1 + 2.0 * k2) + (2.0 * k3 + k4));
}

ad::Var rk4_step_on_tape(ad::Tape& t, const PlantModel& model, ad::Var z,
                         ad::Var u, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("rk4_step_on_tape: dt must be positive");
    ad::Var k1 = model.dynamics_on_tape(t, z, u);
    ad::Var k2 = model.dynamics_on_tape(t, t.add(z, t.scale(k1, 0.5 * dt)), u);
    ad::Var k3 = model.dynamics_on_tape(t, t.add(z, t.scale(k2, 0.5 * dt)), u);
    ad::Var k4 = model.dynamics_on_tape(t, t.add(z, t.scale(k3, dt)), u);
    ad::Var slope = t.add(t.add(k1, t.scale(k2, 2.0)), t.add(t.scale(k3, 2.0), k4));
    return t.add(z, t.scale(slope, dt / 6.0));
}

}  // namespace ncpr
