#pragma once

#include "ncpr/loss.hpp"
#include "ncpr/mlp.hpp"
#include "ncpr/plant.hpp"
#include "ncpr/qp.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace ncpr {

struct TrainConfig {
    std::vector<std::array<double, 2>> ranges;  // per-dimension [lo, hi]
    std::vector<int> counts;                    // per-dimension sample count
    int epochs = 0;
    double learning_rate = 0.0;
    bool constrained = false;
    BoxConstraint box;                          // train-time clamp when constrained
    std::uint64_t seed = 0;
    bool shuffle = false;                       // per-epoch seeded permutation
    std::vector<int> hidden = {64, 64};
    int batch_size = 1;                         // samples averaged per update
    double max_skip_fraction = 0.10;            // per-epoch abort threshold
};

struct TrainReport {
    std::vector<double> epoch_mean_loss;
    std::vector<long> epoch_skipped;
    long skipped = 0;
    long gradient_steps = 0;  // == epochs * |training set| - skipped
    double wall_seconds = 0.0;
};

// Cartesian product of inclusive per-dimension linear spacings, in
// lexicographic order (last dimension fastest).
std::vector<Eigen::VectorXd> grid_states(
    const std::vector<std::array<double, 2>>& ranges, const std::vector<int>& counts);

struct TrainResult {
    MlpParams params;
    TrainReport report;
};

// Self-supervised training: per epoch, per grid sample, evaluate the full
// horizon loss and apply one Adam update. Deterministic for a fixed config.
// Divergent samples are skipped; more than max_skip_fraction of one epoch
// aborts with a diagnostic.
TrainResult train(const TrainConfig& config, const PlantModel& model,
                  const CostSpec& spec, MlpParams init);

}  // namespace ncpr
