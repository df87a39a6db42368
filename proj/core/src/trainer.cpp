#include "ncpr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace ncpr {

std::vector<Eigen::VectorXd> grid_states(
    const std::vector<std::array<double, 2>>& ranges, const std::vector<int>& counts) {
    if (ranges.empty() || ranges.size() != counts.size())
        throw std::invalid_argument("grid_states: ranges/counts mismatch");
    std::size_t total = 1;
    for (std::size_t d = 0; d < ranges.size(); ++d) {
        const auto [lo, hi] = ranges[d];
        if (!(lo < hi))
            throw std::invalid_argument("grid_states: lo >= hi in dimension " +
                                        std::to_string(d));
        if (!std::isfinite(lo) || !std::isfinite(hi))
            throw std::invalid_argument("grid_states: non-finite range");
        if (counts[d] < 2)
            throw std::invalid_argument("grid_states: need >= 2 samples per dimension");
        total *= static_cast<std::size_t>(counts[d]);
    }

    const std::size_t dims = ranges.size();
    std::vector<Eigen::VectorXd> states;
    states.reserve(total);
    std::vector<int> idx(dims, 0);
    for (std::size_t s = 0; s < total; ++s) {
        Eigen::VectorXd z(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            const auto [lo, hi] = ranges[d];
            z[static_cast<Eigen::Index>(d)] =
                lo + (hi - lo) * idx[d] / static_cast<double>(counts[d] - 1);
        }
        states.push_back(std::move(z));
        for (std::size_t d = dims; d-- > 0;) {  // odometer, last dim fastest
            if (++idx[d] < counts[d]) break;
            idx[d] = 0;
        }
    }
    return states;
}

TrainResult train(const TrainConfig& config, const PlantModel& model,
                  const CostSpec& spec, MlpParams init) {
    if (config.epochs < 1)
        throw std::invalid_argument("train: epochs must be >= 1");
    if (static_cast<int>(config.ranges.size()) != model.state_dim())
        throw std::invalid_argument("train: sampling ranges do not match state dim");
    spec.validate(model.state_dim(), model.control_dim());
    if (init.input_dim != model.state_dim() || init.horizon != spec.horizon ||
        init.control_dim != model.control_dim())
        throw std::invalid_argument("train: initial parameters do not match the task");
    if (config.constrained) config.box.validate();

    const std::vector<Eigen::VectorXd> samples = grid_states(config.ranges, config.counts);
    const BoxConstraint* box = config.constrained ? &config.box : nullptr;
    if (config.batch_size < 1)
        throw std::invalid_argument("train: batch size must be >= 1");

    TrainResult result;
    result.params = std::move(init);
    AdamState adam = AdamState::like(result.params);
    std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

    const auto t_start = std::chrono::steady_clock::now();
    ad::Tape tape;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    MlpGrads batch_grads;
    for (const auto& layer : result.params.layers)
        batch_grads.push_back({Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols()),
                               Eigen::VectorXd::Zero(layer.b.size())});
    int batch_fill = 0;
    auto flush_batch = [&]() {
        if (batch_fill == 0) return;
        const double inv = 1.0 / static_cast<double>(batch_fill);
        for (auto& g : batch_grads) {
            g.W *= inv;
            g.b *= inv;
        }
        if (adam_step(result.params, batch_grads, adam, config.learning_rate))
            ++result.report.gradient_steps;
        for (auto& g : batch_grads) {
            g.W.setZero();
            g.b.setZero();
        }
        batch_fill = 0;
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.shuffle)
            std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        long considered = 0;
        long skipped_this_epoch = 0;
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            tape.reset();
            double loss_value = 0.0;
            bool ok = true;
            try {
                LossBreakdown loss =
                    total_loss(tape, result.params, samples[order[pos]], model, spec, box);
                loss_value = loss.total.scalar();
                if (!std::isfinite(loss_value)) {
                    ok = false;
                } else {
                    tape.backward(loss.total);
                    bool finite = true;
                    for (std::size_t l = 0; l < loss.net.layers.size(); ++l) {
                        const Eigen::MatrixXd gw = tape.grad(loss.net.layers[l].first);
                        const Eigen::MatrixXd gb = tape.grad(loss.net.layers[l].second);
                        if (!gw.allFinite() || !gb.allFinite()) {
                            finite = false;
                            break;
                        }
                        batch_grads[l].W += gw;
                        batch_grads[l].b += gb;
                    }
                    if (finite) {
                        ++batch_fill;
                        if (batch_fill >= config.batch_size) flush_batch();
                    } else {
                        ok = false;  // drop the whole batch so far
                        for (auto& g : batch_grads) {
                            g.W.setZero();
                            g.b.setZero();
                        }
                        batch_fill = 0;
                    }
                }
            } catch (const SampleDiverged&) {
                ok = false;
            }

            if (ok) {
                loss_sum += loss_value;
                ++considered;
            } else {
                ++skipped_this_epoch;
                ++result.report.skipped;
                if (static_cast<double>(skipped_this_epoch) >
                    config.max_skip_fraction * static_cast<double>(samples.size()))
                    throw std::runtime_error(
                        "train: epoch " + std::to_string(epoch) + " skipped " +
                        std::to_string(skipped_this_epoch) + " of " +
                        std::to_string(samples.size()) +
                        " samples; training diverged");
            }
        }
        flush_batch();  // epoch boundary closes a partial batch
        result.report.epoch_mean_loss.push_back(
            considered > 0 ? loss_sum / static_cast<double>(considered) : 0.0);
        result.report.epoch_skipped.push_back(skipped_this_epoch);
    }

    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace ncpr
