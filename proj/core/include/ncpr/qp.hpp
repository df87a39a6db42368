#pragma once

#include "ncpr/mlp.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace ncpr {

// Per-channel control bounds defining the admissible set. Infinite entries
// mark unbounded sides.
struct BoxConstraint {
    Eigen::VectorXd lo, hi;

    static BoxConstraint unbounded(int q);
    static BoxConstraint uniform(int q, double lo, double hi);

    int dim() const { return static_cast<int>(lo.size()); }
    void validate() const;  // lo < hi per channel
    bool contains(const Eigen::VectorXd& u) const;
    Eigen::VectorXd clamp(const Eigen::VectorXd& u) const;
    bool is_unbounded() const;
};

// Strictly convex objective u'Ru + c'u over a box; c is the projected
// co-state row from the CPNN prediction.
struct QpProblem {
    Eigen::MatrixXd R;
    Eigen::VectorXd c;
    BoxConstraint box;

    QpProblem(Eigen::MatrixXd R, Eigen::VectorXd c, BoxConstraint box);
};

class QpIterationError : public std::runtime_error {
public:
    QpIterationError(Eigen::VectorXd best, double residual);
    Eigen::VectorXd best_iterate;
    double kkt_residual;
};

inline constexpr double kQpKktTolerance = 1e-10;
inline constexpr int kQpMaxSweeps = 10000;

// Global minimizer of u'Ru + c'u over the box. Diagonal R solves in closed
// form per channel; otherwise cyclic coordinate descent to the KKT tolerance.
Eigen::VectorXd solve_box_qp(const QpProblem& problem);

namespace detail {
Eigen::VectorXd solve_box_qp_impl(const QpProblem& problem, int max_sweeps);
}

// Max per-channel stationarity violation of 2Ru + c over the box.
double kkt_residual(const QpProblem& problem, const Eigen::VectorXd& u);

double qp_objective(const QpProblem& problem, const Eigen::VectorXd& u);

// Row 0 of the prediction, the only entry the deployed controller uses.
Eigen::VectorXd first_row(const ProjectedCostateTrajectory& pred);

// No box: the closed-form stationary control -1/2 R^-1 c. With a box: the
// box QP. The branches agree whenever the unconstrained optimum is feasible.
Eigen::VectorXd extract_control(const ProjectedCostateTrajectory& pred,
                                const Eigen::MatrixXd& R,
                                const BoxConstraint* box = nullptr);

}  // namespace ncpr
