#pragma once

#include "ncpr/qp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ncpr::oracles {

// Brute-force minimum of the box QP objective over a dense per-channel grid
// (endpoints included). Evaluates the objective directly; shares nothing
// with solve_box_qp.
double qp_grid_objective(const QpProblem& problem, int points_per_dim);

struct QpOracleResult {
    int instances = 0;
    // Largest solver objective excess over the grid minimum (positive means
    // the solver did worse than the oracle; should stay within 1e-6).
    double max_excess_over_grid = 0.0;
    // Largest grid-minimum excess over the solver objective, net of the
    // grid's own resolution bound (should stay ~0: the continuous optimum
    // may only undercut the grid by the quadratic gap over half a cell).
    double max_unexplained_undercut = 0.0;
    double max_kkt_residual = 0.0;
};

// Seeded random box-QP instances (q in {1,2}, mixed diagonal/correlated SPD
// R, c ~ N(0,5), random finite boxes) checked against the grid oracle.
QpOracleResult qp_random_instances(int count, std::uint64_t seed, int points_per_dim);

// One random tape program built from the elementary op set (division and
// kinked ops guarded away from their singular points), gradient-checked
// against central finite differences. Returns the max relative error.
double random_composition_grad_error(std::uint64_t seed);

// Gradient check of a full pendulum horizon rollout loss (n = 20) over every
// parameter of a small network. Returns the max relative error.
double rollout_loss_grad_error(std::uint64_t seed, int horizon = 20);

// Error ratio of pendulum RK4 under dt halving (0.05 vs 0.025) against a
// dt = 1e-5 reference trajectory; fourth order puts the ratio near 16.
double rk4_halving_ratio();

// |msd([0,1,4]) - 14/3| for the hand-computed metric oracle.
double msd_oracle_error();

}  // namespace ncpr::oracles
