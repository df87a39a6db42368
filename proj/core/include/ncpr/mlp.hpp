#pragma once

#include "ncpr/tape.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ncpr {

enum class Activation : std::uint32_t { Tanh = 0 };

struct LayerParams {
    Eigen::MatrixXd W;   // out x in
    Eigen::VectorXd b;   // out
};

// Feedforward network mapping a p-dimensional state to an n x q projected
// co-state trajectory. Hidden layers use the tagged activation; the output
// layer is affine. The flat output vector reshapes row-major to n x q with
// row i holding the prediction for step k+i.
struct MlpParams {
    std::vector<LayerParams> layers;
    int input_dim = 0;    // p
    int horizon = 0;      // n
    int control_dim = 0;  // q
    Activation activation = Activation::Tanh;

    int output_dim() const { return horizon * control_dim; }
    std::size_t parameter_count() const;
};

// The n x q prediction: row i holds the co-state at step k+i projected onto
// the input gain, i.e. the only co-state information the control law needs.
struct ProjectedCostateTrajectory {
    Eigen::MatrixXd values;  // n x q

    int horizon() const { return static_cast<int>(values.rows()); }
    int control_dim() const { return static_cast<int>(values.cols()); }
    Eigen::VectorXd row(int i) const { return values.row(i).transpose(); }
    bool all_finite() const { return values.allFinite(); }
};

// Glorot-uniform weights, zero biases; deterministic for a fixed seed.
MlpParams mlp_init(int p, int n, int q, const std::vector<int>& hidden,
                   std::uint64_t seed);

// Plain inference path; pure function of (params, z).
ProjectedCostateTrajectory cpnn_predict(const MlpParams& params,
                                        const Eigen::VectorXd& z);

// Network parameters recorded as tape inputs, so a loss built on top can be
// differentiated w.r.t. every weight and bias.
struct MlpOnTape {
    std::vector<std::pair<ad::Var, ad::Var>> layers;  // (W, b) per layer
    int input_dim = 0, horizon = 0, control_dim = 0;
    Activation activation = Activation::Tanh;
};

MlpOnTape stage_params(ad::Tape& tape, const MlpParams& params);

// Forward pass on the tape; returns the flat (n*q) x 1 prediction vector
// (row-major flattening of the n x q trajectory).
ad::Var cpnn_forward(ad::Tape& tape, const MlpOnTape& net, ad::Var z);

ProjectedCostateTrajectory reshape_prediction(const Eigen::VectorXd& flat, int n, int q);

// ---- optimizer ----

struct AdamState {
    std::vector<LayerParams> m, v;  // first/second moments, parameter-shaped
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

    static AdamState like(const MlpParams& params);
};

using MlpGrads = std::vector<LayerParams>;

// Bias-corrected Adam update. Returns false (parameters and moments
// untouched) when any gradient entry is non-finite: the step is rejected
// and training continues with the next sample.
bool adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr);

// ---- checkpoint persistence ----

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Layout: magic "CPNN1", u32 layer count, per layer (u32 rows, u32 cols,
// row-major f64 weights, f64 biases), then u32 metadata (p, n, q,
// activation tag). All integers little-endian. Round-trip is bit-exact.
std::vector<std::uint8_t> save_checkpoint(const MlpParams& params);
MlpParams load_checkpoint(const std::uint8_t* data, std::size_t size);
MlpParams load_checkpoint(const std::vector<std::uint8_t>& bytes);

}  // namespace ncpr
