#pragma once

#include "ncpr/tape.hpp"

#include <Eigen/Dense>

#include <string_view>

namespace ncpr {

// Control-affine dynamics zdot = f(z) + g(z) u. Evaluators are deterministic
// and expressible on a Tape so training rollouts can backpropagate through
// the integrator. Models are immutable and shareable across threads.
class PlantModel {
public:
    virtual ~PlantModel() = default;

    virtual int state_dim() const = 0;
    virtual int control_dim() const = 0;
    virtual std::string_view name() const = 0;

    virtual Eigen::VectorXd drift(const Eigen::VectorXd& z) const = 0;       // f(z)
    virtual Eigen::MatrixXd input_gain(const Eigen::VectorXd& z) const = 0;  // g(z), p x q
    virtual ad::Var dynamics_on_tape(ad::Tape& tape, ad::Var z, ad::Var u) const = 0;

    // f(z) + g(z) u; the deployed regulator never calls this (or input_gain) --
    // both serve training rollouts, the simulator, and test oracles only.
    Eigen::VectorXd dynamics(const Eigen::VectorXd& z, const Eigen::VectorXd& u) const;

protected:
    void check_dims(const Eigen::VectorXd& z, const Eigen::VectorXd* u) const;
};

// z = [x, y, theta], u = [v, omega]; f = 0, g = [[cos th, 0], [sin th, 0], [0, 1]].
// theta is not wrapped: out-of-range headings are legitimate inputs.
class UnicycleModel final : public PlantModel {
public:
    int state_dim() const override { return 3; }
    int control_dim() const override { return 2; }
    std::string_view name() const override { return "unicycle"; }

    Eigen::VectorXd drift(const Eigen::VectorXd& z) const override;
    Eigen::MatrixXd input_gain(const Eigen::VectorXd& z) const override;
    ad::Var dynamics_on_tape(ad::Tape& tape, ad::Var z, ad::Var u) const override;
};

// z = [theta, thetadot], scalar torque input.
// f = [thetadot, -g0 sin(theta) / l], g = [0, 1/(m l^2)].
class PendulumModel final : public PlantModel {
public:
    PendulumModel(double mass = 1.0, double length = 1.0, double gravity = 9.81);

    int state_dim() const override { return 2; }
    int control_dim() const override { return 1; }
    std::string_view name() const override { return "pendulum"; }

    double mass() const { return mass_; }
    double length() const { return length_; }
    double gravity() const { return gravity_; }

    Eigen::VectorXd drift(const Eigen::VectorXd& z) const override;
    Eigen::MatrixXd input_gain(const Eigen::VectorXd& z) const override;
    ad::Var dynamics_on_tape(ad::Tape& tape, ad::Var z, ad::Var u) const override;

private:
    double mass_, length_, gravity_;
    double gravity_coeff_;  // -g0 / l
    double gain_coeff_;     // 1 / (m l^2)
};

// Classic fourth-order Runge-Kutta with u held constant over the step.
Eigen::VectorXd rk4_step(const PlantModel& model, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& u, double dt);

// The same scheme recorded on a tape, used by training rollouts.
ad::Var rk4_step_on_tape(ad::Tape& tape, const PlantModel& model, ad::Var z,
                         ad::Var u, double dt);

}  // namespace ncpr
