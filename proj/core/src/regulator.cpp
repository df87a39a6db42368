#include "ncpr/regulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ncpr {

CpnnController::CpnnController(MlpParams params, Eigen::MatrixXd R,
                               std::optional<BoxConstraint> box)
    : params_(std::move(params)), R_(std::move(R)), box_(std::move(box)) {
    if (box_) box_->validate();
}

Eigen::VectorXd CpnnController::act(const Eigen::VectorXd& error_state) {
    const ProjectedCostateTrajectory pred = cpnn_predict(params_, error_state);
    last_row_ = first_row(pred);
    return extract_control(pred, R_, box_ ? &*box_ : nullptr);
}

TrajectoryLog closed_loop(Controller& controller, const PlantModel& model,
                          const CostSpec& spec, const Eigen::VectorXd& z0,
                          const Eigen::VectorXd& z_ref, double duration) {
    spec.validate(model.state_dim(), model.control_dim());
    if (z0.size() != model.state_dim() || z_ref.size() != model.state_dim())
        throw std::invalid_argument("closed_loop: z0/z_ref dims do not match the plant");
    const double steps_exact = duration / spec.dt;
    const long steps = std::lround(steps_exact);
    if (steps < 1 || std::abs(steps_exact - static_cast<double>(steps)) > 1e-9)
        throw std::invalid_argument("closed_loop: duration must be a positive multiple of dt");

    TrajectoryLog log;
    log.dt = spec.dt;
    log.times.reserve(static_cast<std::size_t>(steps) + 1);
    log.states.reserve(static_cast<std::size_t>(steps) + 1);
    log.controls.reserve(static_cast<std::size_t>(steps));

    Eigen::VectorXd z = z0;
    log.times.push_back(0.0);
    log.states.push_back(z);
    for (long k = 0; k < steps; ++k) {
        const Eigen::VectorXd error = z - z_ref;

        const auto t0 = std::chrono::steady_clock::now();
        const Eigen::VectorXd u = controller.act(error);
        const auto t1 = std::chrono::steady_clock::now();

        log.controls.push_back(u);
        log.latencies.push_back(std::chrono::duration<double>(t1 - t0).count());
        log.stage_costs.push_back(error.dot(spec.Q * error) + u.dot(spec.R * u));
        if (const Eigen::VectorXd* row = controller.last_costate_row())
            log.costate_rows.push_back(*row);

        z = rk4_step(model, z, u, spec.dt);
        log.times.push_back(static_cast<double>(k + 1) * spec.dt);
        log.states.push_back(z);
        if (!z.allFinite()) {
            log.divergent = true;
            break;
        }
    }
    return log;
}

TrajectoryLog closed_loop(const MlpParams& params, const PlantModel& model,
                          const CostSpec& spec, const BoxConstraint* box,
                          const Eigen::VectorXd& z0, const Eigen::VectorXd& z_ref,
                          double duration) {
    if (params.input_dim != model.state_dim())
        throw std::invalid_argument("closed_loop: checkpoint input dim " +
                                    std::to_string(params.input_dim) +
                                    " does not match plant state dim " +
                                    std::to_string(model.state_dim()));
    CpnnController controller(params, spec.R,
                              box ? std::optional<BoxConstraint>(*box) : std::nullopt);
    return closed_loop(controller, model, spec, z0, z_ref, duration);
}

double convergence_error(const TrajectoryLog& log, const Eigen::VectorXd& z_ref) {
    if (log.states.empty())
        throw std::invalid_argument("convergence_error: empty log");
    return (log.states.back() - z_ref).cwiseAbs().sum();
}

double msd(const std::vector<double>& series) {
    const std::size_t n = series.size();
    if (n < 2)
        throw std::invalid_argument("msd: series needs at least 2 samples");
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d;
        if (i == 0)
            d = series[1] - series[0];
        else if (i == n - 1)
            d = series[n - 1] - series[n - 2];
        else
            d = (series[i + 1] - series[i - 1]) / 2.0;
        sum_sq += d * d;
    }
    return sum_sq / static_cast<double>(n);
}

std::vector<double> msd_per_channel(const TrajectoryLog& log) {
    if (log.controls.empty())
        throw std::invalid_argument("msd_per_channel: log has no controls");
    const int q = static_cast<int>(log.controls.front().size());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(q));
    for (int j = 0; j < q; ++j) {
        std::vector<double> channel;
        channel.reserve(log.controls.size());
        for (const auto& u : log.controls) channel.push_back(u[j]);
        out.push_back(msd(channel));
    }
    return out;
}

double msd_total(const TrajectoryLog& log) {
    double total = 0.0;
    for (double v : msd_per_channel(log)) total += v;
    return total;
}

LatencyStats step_latency_summary(const TrajectoryLog& log) {
    if (log.latencies.empty())
        throw std::invalid_argument("step_latency_summary: empty log");
    std::vector<double> sorted = log.latencies;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double v : sorted) sum += v;
    const std::size_t idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(sorted.size()))) - 1;
    return {sum / static_cast<double>(sorted.size()), sorted[idx]};
}

}  // namespace ncpr
