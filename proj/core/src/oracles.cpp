#include "ncpr/oracles.hpp"

#include "ncpr/loss.hpp"
#include "ncpr/mlp.hpp"
#include "ncpr/plant.hpp"
#include "ncpr/regulator.hpp"
#include "ncpr/tape.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ncpr::oracles {

double qp_grid_objective(const QpProblem& p, int points_per_dim) {
    const int q = static_cast<int>(p.c.size());
    if (points_per_dim < 2) throw std::invalid_argument("qp oracle: need >= 2 points");
    auto axis = [&](int j) {
        Eigen::ArrayXd u(points_per_dim);
        const double lo = p.box.lo[j], hi = p.box.hi[j];
        for (int i = 0; i < points_per_dim; ++i)
            u[i] = lo + (hi - lo) * i / static_cast<double>(points_per_dim - 1);
        return u;
    };

    if (q == 1) {
        const Eigen::ArrayXd u = axis(0);
        return (p.R(0, 0) * u.square() + p.c[0] * u).minCoeff();
    }
    if (q == 2) {
        const Eigen::ArrayXd u0 = axis(0);
        const Eigen::ArrayXd u1 = axis(1);
        const Eigen::ArrayXd a1 = p.R(1, 1) * u1.square() + p.c[1] * u1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < points_per_dim; ++i) {
            const double base = p.R(0, 0) * u0[i] * u0[i] + p.c[0] * u0[i];
            const double cross = 2.0 * p.R(0, 1) * u0[i];
            best = std::min(best, base + (a1 + cross * u1).minCoeff());
        }
        return best;
    }
    throw std::invalid_argument("qp oracle: grid search supports q <= 2");
}

QpOracleResult qp_random_instances(int count, std::uint64_t seed, int points_per_dim) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    QpOracleResult result;
    result.instances = count;
    for (int k = 0; k < count; ++k) {
        const int q = (unit(rng) < 0.5) ? 1 : 2;
        Eigen::MatrixXd R;
        if (q == 1 || unit(rng) < 0.5) {
            R = Eigen::MatrixXd::Zero(q, q);
            for (int j = 0; j < q; ++j) R(j, j) = 0.2 + 3.8 * unit(rng);
        } else {
            Eigen::MatrixXd A(q, q);
            for (int r = 0; r < q; ++r)
                for (int c = 0; c < q; ++c) A(r, c) = normal(rng);
            R = A.transpose() * A + 0.1 * Eigen::MatrixXd::Identity(q, q);
        }
        Eigen::VectorXd c(q);
        for (int j = 0; j < q; ++j) c[j] = 5.0 * normal(rng);
        BoxConstraint box{Eigen::VectorXd(q), Eigen::VectorXd(q)};
        for (int j = 0; j < q; ++j) {
            box.lo[j] = -3.0 + 2.95 * unit(rng);   // in [-3, -0.05]
            box.hi[j] = 0.05 + 2.95 * unit(rng);   // in [0.05, 3]
        }

        const QpProblem problem(R, c, box);
        const Eigen::VectorXd u = solve_box_qp(problem);
        const double solver_obj = qp_objective(problem, u);
        const double grid_obj = qp_grid_objective(problem, points_per_dim);
        result.max_kkt_residual =
            std::max(result.max_kkt_residual, kkt_residual(problem, u));
        result.max_excess_over_grid =
            std::max(result.max_excess_over_grid, solver_obj - grid_obj);

        // The continuous optimum may undercut the best grid point by at most
        // the quadratic gap over half a cell in the interior channels.
        const double lambda_max =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(R).eigenvalues().maxCoeff();
        double gap_bound = 0.0;
        for (int j = 0; j < q; ++j) {
            const double h = (box.hi[j] - box.lo[j]) / (points_per_dim - 1);
            const bool interior = u[j] > box.lo[j] && u[j] < box.hi[j];
            if (interior) gap_bound += lambda_max * 0.25 * h * h;
        }
        result.max_unexplained_undercut = std::max(
            result.max_unexplained_undercut, (grid_obj - solver_obj) - gap_bound);
    }
    return result;
}

// ---- random tape compositions ----

namespace {

enum class POp {
    Add, Sub, Mul, Div, MatVec, Dot, Tanh, Sin, Cos, Square, Abs, Sum, Scale, Clamp
};

struct ProgramStep {
    POp op;
    int a = -1, b = -1;
    double factor = 0.0;
    double lo = 0.0, hi = 0.0;
};

struct Program {
    std::vector<ProgramStep> steps;
    int final_index = -1;

    ad::Var run(ad::Tape& t, const std::vector<ad::Var>& inputs) const {
        std::vector<ad::Var> pool = inputs;
        for (const ProgramStep& s : steps) {
            ad::Var a = pool[static_cast<std::size_t>(s.a)];
            switch (s.op) {
            case POp::Add: pool.push_back(t.add(a, pool[s.b])); break;
            case POp::Sub: pool.push_back(t.sub(a, pool[s.b])); break;
            case POp::Mul: pool.push_back(t.mul(a, pool[s.b])); break;
            case POp::Div: pool.push_back(t.div(a, pool[s.b])); break;
            case POp::MatVec: pool.push_back(t.matvec(a, pool[s.b])); break;
            case POp::Dot: pool.push_back(t.dot(a, pool[s.b])); break;
            case POp::Tanh: pool.push_back(t.tanh(a)); break;
            case POp::Sin: pool.push_back(t.sin(a)); break;
            case POp::Cos: pool.push_back(t.cos(a)); break;
            case POp::Square: pool.push_back(t.square(a)); break;
            case POp::Abs: pool.push_back(t.abs(a)); break;
            case POp::Sum: pool.push_back(t.sum(a)); break;
            case POp::Scale: pool.push_back(t.scale(a, s.factor)); break;
            case POp::Clamp: pool.push_back(t.clamp(a, s.lo, s.hi)); break;
            }
        }
        return pool[static_cast<std::size_t>(final_index)];
    }
};

}  // namespace

double random_composition_grad_error(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto entry = [&]() { return -1.2 + 2.4 * unit(rng); };

    std::vector<Eigen::MatrixXd> inputs;
    Eigen::MatrixXd vec(3, 1), scalar(1, 1), mat(2, 3);
    for (int i = 0; i < 3; ++i) vec(i, 0) = entry();
    scalar(0, 0) = entry();
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) mat(r, c) = entry();
    inputs = {vec, scalar, mat};

    // Dry-run generation: track concrete values so guards (division away
    // from zero, kinks at a safe distance) hold at the evaluation point.
    std::vector<Eigen::MatrixXd> values = inputs;
    Program program;
    const int target_steps = 5 + static_cast<int>(unit(rng) * 6.0);
    const POp choices[] = {POp::Add, POp::Sub, POp::Mul, POp::Div, POp::MatVec,
                           POp::Dot, POp::Tanh, POp::Sin, POp::Cos, POp::Square,
                           POp::Abs, POp::Sum, POp::Scale, POp::Clamp};

    auto same_or_scalar = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        const bool same = a.rows() == b.rows() && a.cols() == b.cols();
        return same || a.size() == 1 || b.size() == 1;
    };

    while (static_cast<int>(program.steps.size()) < target_steps) {
        const POp op = choices[static_cast<std::size_t>(unit(rng) * 14.0) % 14];
        const int a = static_cast<int>(unit(rng) * values.size()) %
                      static_cast<int>(values.size());
        const int b = static_cast<int>(unit(rng) * values.size()) %
                      static_cast<int>(values.size());
        const Eigen::MatrixXd& va = values[static_cast<std::size_t>(a)];
        const Eigen::MatrixXd& vb = values[static_cast<std::size_t>(b)];
        ProgramStep step{op, a, b, 0.0, 0.0, 0.0};
        Eigen::MatrixXd out;

        switch (op) {
        case POp::Add:
            if (!same_or_scalar(va, vb)) continue;
            out = va.size() == 1 ? (vb.array() + va(0, 0)).matrix()
                 : vb.size() == 1 ? (va.array() + vb(0, 0)).matrix()
                                  : Eigen::MatrixXd(va + vb);
            break;
        case POp::Sub:
            if (!same_or_scalar(va, vb)) continue;
            out = va.size() == 1 ? (va(0, 0) - vb.array()).matrix()
                 : vb.size() == 1 ? (va.array() - vb(0, 0)).matrix()
                                  : Eigen::MatrixXd(va - vb);
            break;
        case POp::Mul:
            if (!same_or_scalar(va, vb)) continue;
            out = va.size() == 1 ? Eigen::MatrixXd(va(0, 0) * vb)
                 : vb.size() == 1 ? Eigen::MatrixXd(vb(0, 0) * va)
                                  : Eigen::MatrixXd(va.cwiseProduct(vb));
            break;
        case POp::Div:
            if (!same_or_scalar(va, vb)) continue;
            if (vb.cwiseAbs().minCoeff() < 0.3) continue;
            out = va.size() == 1 ? (va(0, 0) / vb.array()).matrix()
                 : vb.size() == 1 ? Eigen::MatrixXd(va / vb(0, 0))
                                  : Eigen::MatrixXd(va.cwiseQuotient(vb));
            break;
        case POp::MatVec:
            if (vb.cols() != 1 || va.cols() != vb.rows() || va.rows() == 0) continue;
            out = va * vb;
            break;
        case POp::Dot:
            if (va.cols() != 1 || vb.cols() != 1 || va.rows() != vb.rows()) continue;
            out = Eigen::MatrixXd::Constant(1, 1, va.col(0).dot(vb.col(0)));
            break;
        case POp::Tanh: out = va.array().tanh().matrix(); break;
        case POp::Sin: out = va.array().sin().matrix(); break;
        case POp::Cos: out = va.array().cos().matrix(); break;
        case POp::Square: out = va.cwiseProduct(va); break;
        case POp::Abs:
            if (va.cwiseAbs().minCoeff() < 0.1) continue;  // keep off the kink
            out = va.cwiseAbs();
            break;
        case POp::Sum: out = Eigen::MatrixXd::Constant(1, 1, va.sum()); break;
        case POp::Scale:
            step.factor = -2.0 + 4.0 * unit(rng);
            out = step.factor * va;
            break;
        case POp::Clamp: {
            const double vmin = va.minCoeff(), vmax = va.maxCoeff();
            const double mid = 0.5 * (vmin + vmax);
            const bool saturate = unit(rng) < 0.5 &&
                                  (va.array() - mid).abs().minCoeff() > 0.125;
            if (saturate) {
                step.lo = mid;
                step.hi = vmax + 0.5 + unit(rng);
            } else {
                step.lo = vmin - 0.2 - unit(rng);
                step.hi = vmax + 0.2 + unit(rng);
            }
            out = va.cwiseMax(step.lo).cwiseMin(step.hi);
            break;
        }
        }
        if (!out.allFinite() || out.cwiseAbs().maxCoeff() > 50.0) continue;
        values.push_back(out);
        program.steps.push_back(step);
    }

    // Reduce to a scalar head over the final value.
    const int last = static_cast<int>(values.size()) - 1;
    if (values.back().size() != 1) {
        program.steps.push_back({POp::Sum, last, -1, 0.0, 0.0, 0.0});
        values.push_back(Eigen::MatrixXd::Constant(1, 1, values.back().sum()));
    }
    program.final_index = static_cast<int>(values.size()) - 1;

    return ad::grad_check(
        [&program](ad::Tape& t, const std::vector<ad::Var>& vars) {
            return program.run(t, vars);
        },
        inputs, 1e-6);
}

double rollout_loss_grad_error(std::uint64_t seed, int horizon) {
    const PendulumModel model;
    CostSpec spec;
    spec.Q = 100.0 * Eigen::MatrixXd::Identity(2, 2);
    spec.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
    spec.S = 10.0 * spec.Q;
    spec.horizon = horizon;
    spec.dt = 0.05;
    spec.reg = RegKind::Uniform;
    spec.beta = 0.1;

    const MlpParams params = mlp_init(2, horizon, 1, {8, 8}, seed);
    std::vector<Eigen::MatrixXd> point;
    for (const auto& layer : params.layers) {
        point.push_back(layer.W);
        point.push_back(Eigen::MatrixXd(layer.b));
    }
    const Eigen::VectorXd z = Eigen::Vector2d(1.0, -0.5);

    auto f = [&](ad::Tape& t, const std::vector<ad::Var>& vars) {
        MlpOnTape net;
        net.input_dim = 2;
        net.horizon = horizon;
        net.control_dim = 1;
        for (std::size_t i = 0; i + 1 < vars.size(); i += 2)
            net.layers.emplace_back(vars[i], vars[i + 1]);
        return total_loss(t, net, z, model, spec, nullptr).total;
    };
    return ad::grad_check(f, point, 1e-6);
}

double rk4_halving_ratio() {
    const PendulumModel model;
    const Eigen::Vector2d z0(2.0, 1.0);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.5);
    const double duration = 1.0;

    auto integrate = [&](double dt) {
        Eigen::VectorXd z = z0;
        const long steps = std::lround(duration / dt);
        for (long k = 0; k < steps; ++k) z = rk4_step(model, z, u, dt);
        return z;
    };

    const Eigen::VectorXd reference = integrate(1e-5);
    const double coarse = (integrate(0.05) - reference).norm();
    const double fine = (integrate(0.025) - reference).norm();
    return coarse / fine;
}

double msd_oracle_error() {
    return std::abs(msd({0.0, 1.0, 4.0}) - 14.0 / 3.0);
}

}  // namespace ncpr::oracles
