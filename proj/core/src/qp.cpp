#include "ncpr/qp.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <string>

namespace ncpr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

BoxConstraint BoxConstraint::unbounded(int q) {
    return {Eigen::VectorXd::Constant(q, -kInf), Eigen::VectorXd::Constant(q, kInf)};
}

BoxConstraint BoxConstraint::uniform(int q, double lo, double hi) {
    BoxConstraint box{Eigen::VectorXd::Constant(q, lo), Eigen::VectorXd::Constant(q, hi)};
    box.validate();
    return box;
}

void BoxConstraint::validate() const {
    if (lo.size() != hi.size())
        throw std::invalid_argument("box: lo/hi dimension mismatch");
    for (Eigen::Index j = 0; j < lo.size(); ++j) {
        if (std::isnan(lo[j]) || std::isnan(hi[j]))
            throw std::invalid_argument("box: NaN bound on channel " + std::to_string(j));
        if (!(lo[j] < hi[j]))
            throw std::invalid_argument("box: lo >= hi on channel " + std::to_string(j));
    }
}

bool BoxConstraint::contains(const Eigen::VectorXd& u) const {
    for (Eigen::Index j = 0; j < u.size(); ++j)
        if (u[j] < lo[j] || u[j] > hi[j]) return false;
    return true;
}

Eigen::VectorXd BoxConstraint::clamp(const Eigen::VectorXd& u) const {
    return u.cwiseMax(lo).cwiseMin(hi);
}

bool BoxConstraint::is_unbounded() const {
    return (lo.array() == -kInf).all() && (hi.array() == kInf).all();
}

QpProblem::QpProblem(Eigen::MatrixXd R_in, Eigen::VectorXd c_in, BoxConstraint box_in)
    : R(std::move(R_in)), c(std::move(c_in)), box(std::move(box_in)) {
    if (R.rows() != R.cols() || R.rows() != c.size() || c.size() != box.lo.size())
        throw std::invalid_argument("qp: inconsistent dimensions");
    if (!R.isApprox(R.transpose(), 1e-12))
        throw std::invalid_argument("qp: R must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("qp: R must be positive definite");
    box.validate();
    if (!c.allFinite())
        throw std::invalid_argument("qp: non-finite linear term");
}

QpIterationError::QpIterationError(Eigen::VectorXd best, double residual)
    : std::runtime_error("qp: coordinate descent hit the sweep cap (KKT residual " +
                         std::to_string(residual) + ")"),
      best_iterate(std::move(best)), kkt_residual(residual) {}

double qp_objective(const QpProblem& p, const Eigen::VectorXd& u) {
    return u.dot(p.R * u) + p.c.dot(u);
}

double kkt_residual(const QpProblem& p, const Eigen::VectorXd& u) {
    const Eigen::VectorXd g = 2.0 * (p.R * u) + p.c;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        double violation;
        if (u[j] <= p.box.lo[j])
            violation = std::max(0.0, -g[j]);   // at the lower bound the
        else if (u[j] >= p.box.hi[j])           // gradient must point outward
            violation = std::max(0.0, g[j]);
        else
            violation = std::abs(g[j]);
        worst = std::max(worst, violation);
    }
    return worst;
}

namespace detail {

Eigen::VectorXd solve_box_qp_impl(const QpProblem& p, int max_sweeps) {
    const Eigen::Index q = p.c.size();

    bool diagonal = true;
    for (Eigen::Index i = 0; i < q && diagonal; ++i)
        for (Eigen::Index j = 0; j < q; ++j)
            if (i != j && p.R(i, j) != 0.0) { diagonal = false; break; }

    if (diagonal) {
        Eigen::VectorXd u(q);
        for (Eigen::Index j = 0; j < q; ++j)
            u[j] = std::min(std::max(-p.c[j] / (2.0 * p.R(j, j)), p.box.lo[j]),
                            p.box.hi[j]);
        return u;
    }

    // Cyclic coordinate descent on the strictly convex objective; each
    // coordinate update is the exact 1-D minimizer clamped to its bounds.
    Eigen::VectorXd u = p.box.clamp(
        -0.5 * Eigen::LLT<Eigen::MatrixXd>(p.R).solve(p.c));
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (Eigen::Index j = 0; j < q; ++j) {
            double off = 0.0;
            for (Eigen::Index m = 0; m < q; ++m)
                if (m != j) off += p.R(j, m) * u[m];
            const double stationary = (-0.5 * p.c[j] - off) / p.R(j, j);
            u[j] = std::min(std::max(stationary, p.box.lo[j]), p.box.hi[j]);
        }
        if (kkt_residual(p, u) <= kQpKktTolerance) return u;
    }
    throw QpIterationError(u, kkt_residual(p, u));
}

}  // namespace detail

Eigen::VectorXd solve_box_qp(const QpProblem& p) {
    return detail::solve_box_qp_impl(p, kQpMaxSweeps);
}

Eigen::VectorXd first_row(const ProjectedCostateTrajectory& pred) {
    if (pred.values.rows() < 1)
        throw std::invalid_argument("first_row: empty prediction");
    return pred.row(0);
}

Eigen::VectorXd extract_control(const ProjectedCostateTrajectory& pred,
                                const Eigen::MatrixXd& R, const BoxConstraint* box) {
    const Eigen::VectorXd c = first_row(pred);
    if (!c.allFinite())
        throw std::invalid_argument("extract_control: non-finite prediction row");
    if (box == nullptr || box->is_unbounded()) {
        if (R.rows() == 1) return Eigen::VectorXd::Constant(1, -0.5 * c[0] / R(0, 0));
        return -0.5 * Eigen::LLT<Eigen::MatrixXd>(R).solve(c);
    }
    return solve_box_qp(QpProblem(R, c, *box));
}

}  // namespace ncpr
