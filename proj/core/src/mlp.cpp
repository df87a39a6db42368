#include "ncpr/mlp.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

namespace ncpr {

std::size_t MlpParams::parameter_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers)
        count += static_cast<std::size_t>(layer.W.size() + layer.b.size());
    return count;
}

MlpParams mlp_init(int p, int n, int q, const std::vector<int>& hidden,
                   std::uint64_t seed) {
    if (p < 1 || n < 1 || q < 1)
        throw std::invalid_argument("mlp_init: dims must be >= 1");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("mlp_init: zero-sized hidden layer");

    std::vector<int> dims;
    dims.push_back(p);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(n * q);

    std::mt19937_64 rng(seed);
    MlpParams params;
    params.input_dim = p;
    params.horizon = n;
    params.control_dim = q;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> uniform(-limit, limit);
        LayerParams layer;
        layer.W.resize(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) layer.W(r, c) = uniform(rng);
        layer.b = Eigen::VectorXd::Zero(fan_out);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace {

double tanh_activate(double x) { return std::tanh(x); }

void check_input(const MlpParams& params, Eigen::Index got) {
    if (got != params.input_dim)
        throw std::invalid_argument("cpnn: input has dim " + std::to_string(got) +
                                    ", expected " + std::to_string(params.input_dim));
}

}  // namespace

ProjectedCostateTrajectory cpnn_predict(const MlpParams& params,
                                        const Eigen::VectorXd& z) {
    check_input(params, z.size());
    Eigen::VectorXd h = z;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        h = params.layers[l].W * h + params.layers[l].b;
        if (l + 1 < params.layers.size()) h = h.unaryExpr(&tanh_activate);
    }
    return reshape_prediction(h, params.horizon, params.control_dim);
}

ProjectedCostateTrajectory reshape_prediction(const Eigen::VectorXd& flat, int n, int q) {
    if (flat.size() != static_cast<Eigen::Index>(n) * q)
        throw std::invalid_argument("reshape_prediction: flat size " +
                                    std::to_string(flat.size()) + " != " +
                                    std::to_string(n) + "*" + std::to_string(q));
    Eigen::MatrixXd out(n, q);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < q; ++j) out(i, j) = flat[i * q + j];
    return ProjectedCostateTrajectory{std::move(out)};
}

MlpOnTape stage_params(ad::Tape& tape, const MlpParams& params) {
    MlpOnTape net;
    net.input_dim = params.input_dim;
    net.horizon = params.horizon;
    net.control_dim = params.control_dim;
    net.activation = params.activation;
    for (const auto& layer : params.layers)
        net.layers.emplace_back(tape.input(layer.W),
                                tape.input(Eigen::MatrixXd(layer.b)));
    return net;
}

ad::Var cpnn_forward(ad::Tape& t, const MlpOnTape& net, ad::Var z) {
    if (z.rows() != net.input_dim || z.cols() != 1)
        throw std::invalid_argument("cpnn_forward: input has dim " +
                                    std::to_string(z.rows()) + "x" +
                                    std::to_string(z.cols()) + ", expected " +
                                    std::to_string(net.input_dim) + "x1");
    ad::Var h = z;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        h = t.add(t.matvec(net.layers[l].first, h), net.layers[l].second);
        if (l + 1 < net.layers.size()) h = t.tanh(h);
    }
    return h;
}

// ---- Adam ----

AdamState AdamState::like(const MlpParams& params) {
    AdamState state;
    for (const auto& layer : params.layers) {
        LayerParams zeros;
        zeros.W = Eigen::MatrixXd::Zero(layer.W.rows(), layer.W.cols());
        zeros.b = Eigen::VectorXd::Zero(layer.b.size());
        state.m.push_back(zeros);
        state.v.push_back(std::move(zeros));
    }
    return state;
}

bool adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr) {
    if (grads.size() != params.layers.size())
        throw std::invalid_argument("adam_step: gradient/parameter layer count mismatch");
    for (std::size_t l = 0; l < grads.size(); ++l) {
        if (grads[l].W.rows() != params.layers[l].W.rows() ||
            grads[l].W.cols() != params.layers[l].W.cols() ||
            grads[l].b.size() != params.layers[l].b.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                        std::to_string(l));
        if (!grads[l].W.allFinite() || !grads[l].b.allFinite()) return false;
    }

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
    };
    for (std::size_t l = 0; l < grads.size(); ++l) {
        update(params.layers[l].W, state.m[l].W, state.v[l].W, grads[l].W);
        update(params.layers[l].b, state.m[l].b, state.v[l].b, grads[l].b);
    }
    return true;
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[5] = {'C', 'P', 'N', 'N', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

struct Reader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) {
        if (pos + n > size)
            throw CheckpointError(std::string("checkpoint: truncated stream while reading ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
        pos += 8;
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
};

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const MlpParams& params) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + sizeof kMagic);
    put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& layer : params.layers) {
        put_u32(out, static_cast<std::uint32_t>(layer.W.rows()));
        put_u32(out, static_cast<std::uint32_t>(layer.W.cols()));
        for (Eigen::Index r = 0; r < layer.W.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.W.cols(); ++c) put_f64(out, layer.W(r, c));
        for (Eigen::Index r = 0; r < layer.b.size(); ++r) put_f64(out, layer.b[r]);
    }
    put_u32(out, static_cast<std::uint32_t>(params.input_dim));
    put_u32(out, static_cast<std::uint32_t>(params.horizon));
    put_u32(out, static_cast<std::uint32_t>(params.control_dim));
    put_u32(out, static_cast<std::uint32_t>(params.activation));
    return out;
}

MlpParams load_checkpoint(const std::uint8_t* data, std::size_t size) {
    Reader in{data, size};
    in.need(sizeof kMagic, "magic");
    if (std::memcmp(data, kMagic, sizeof kMagic) != 0)
        throw CheckpointError("checkpoint: bad magic (expected CPNN1)");
    in.pos = sizeof kMagic;

    MlpParams params;
    const std::uint32_t layer_count = in.u32("layer count");
    if (layer_count == 0 || layer_count > 64)
        throw CheckpointError("checkpoint: implausible layer count " +
                              std::to_string(layer_count));
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        const std::uint32_t rows = in.u32("layer rows");
        const std::uint32_t cols = in.u32("layer cols");
        if (rows == 0 || cols == 0)
            throw CheckpointError("checkpoint: zero-sized layer " + std::to_string(l));
        LayerParams layer;
        layer.W.resize(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c) layer.W(r, c) = in.f64("weights");
        layer.b.resize(rows);
        for (std::uint32_t r = 0; r < rows; ++r) layer.b[r] = in.f64("biases");
        if (!params.layers.empty() &&
            params.layers.back().W.rows() != layer.W.cols())
            throw CheckpointError("checkpoint: layer " + std::to_string(l) +
                                  " input dim does not chain with previous layer");
        params.layers.push_back(std::move(layer));
    }
    params.input_dim = static_cast<int>(in.u32("metadata p"));
    params.horizon = static_cast<int>(in.u32("metadata n"));
    params.control_dim = static_cast<int>(in.u32("metadata q"));
    const std::uint32_t tag = in.u32("activation tag");
    if (tag != static_cast<std::uint32_t>(Activation::Tanh))
        throw CheckpointError("checkpoint: unknown activation tag " + std::to_string(tag));
    params.activation = static_cast<Activation>(tag);

    if (params.layers.front().W.cols() != params.input_dim)
        throw CheckpointError("checkpoint: first layer does not match input dim p");
    if (params.layers.back().W.rows() !=
        static_cast<Eigen::Index>(params.horizon) * params.control_dim)
        throw CheckpointError("checkpoint: last layer does not match n*q output dim");
    return params;
}

MlpParams load_checkpoint(const std::vector<std::uint8_t>& bytes) {
    return load_checkpoint(bytes.data(), bytes.size());
}

}  // namespace ncpr
