#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace ncpr::ad {

class Tape;

// Handle to one node of a Tape. Copyable; the referenced shape never changes.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::int32_t index) : tape_(tape), index_(index) {}

    Tape* tape() const { return tape_; }
    std::int32_t index() const { return index_; }
    bool valid() const { return tape_ != nullptr && index_ >= 0; }

    const Eigen::MatrixXd& value() const;
    double scalar() const;
    int rows() const { return static_cast<int>(value().rows()); }
    int cols() const { return static_cast<int>(value().cols()); }
    bool is_scalar() const { return rows() == 1 && cols() == 1; }

private:
    Tape* tape_ = nullptr;
    std::int32_t index_ = -1;
};

// Reverse-mode autodiff over an append-only operation tape.
//
// Nodes hold dense f64 payloads (scalars are 1x1 matrices, vectors are m x 1).
// Parent indices always precede the node, so a single reverse sweep visits
// every node exactly once and accumulates fan-out gradients additively.
// A Tape is single-threaded; distinct tapes may run on distinct threads.
class Tape {
public:
    enum class Op : std::uint8_t {
        Constant, Input,
        Add, Sub, Mul, Div,
        MatVec, MatMul, Dot,
        Tanh, Sin, Cos, Square, Abs,
        Sum, Scale, Clamp,
    };

    Var constant(Eigen::MatrixXd value);
    Var constant(double value);
    // Leaf marked as a parameter; grad() is meaningful after backward().
    Var input(Eigen::MatrixXd value);
    Var input(double value);

    // Elementwise binary ops; a 1x1 operand broadcasts against any shape.
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);

    Var matvec(Var a, Var x);   // (m x k) * (k x 1)
    Var matmul(Var a, Var b);   // (m x k) * (k x n)
    Var dot(Var x, Var y);      // column vectors of equal length -> scalar

    Var tanh(Var x);
    Var sin(Var x);
    Var cos(Var x);
    Var square(Var x);
    Var abs(Var x);
    Var sum(Var x);             // sum of all entries -> scalar
    Var scale(Var x, double factor);

    // Elementwise clamp with constant bounds (value-shaped or 1x1 each).
    // Local derivative is 1 strictly inside the bounds, 0 at or outside them.
    Var clamp(Var x, Eigen::MatrixXd lo, Eigen::MatrixXd hi);
    Var clamp(Var x, double lo, double hi);

    // Reverse sweep from a scalar loss. Rejects non-scalar seeds.
    void backward(Var loss);
    // Total derivative of the last backward() loss w.r.t. node v.
    // Zero-filled if the node was never reached.
    Eigen::MatrixXd grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    void reset();               // drop all nodes, keep allocated storage
    long backward_visits() const { return backward_visits_; }

    const Eigen::MatrixXd& value_of(std::int32_t index) const;

private:
    struct Node {
        Op op;
        std::int32_t a = -1;
        std::int32_t b = -1;
        double factor = 0.0;        // Scale only
        Eigen::MatrixXd value;
        Eigen::MatrixXd lo, hi;     // Clamp only
    };

    std::vector<Node> nodes_;
    std::vector<Eigen::MatrixXd> adjoints_;
    long backward_visits_ = 0;

    Var push(Node node);
    const Node& at(Var v) const;
    void accumulate(std::int32_t index, const Eigen::MatrixXd& delta);
};

inline const Eigen::MatrixXd& Var::value() const { return tape_->value_of(index_); }

// Finite-difference gradient check: rebuilds the tape via f at perturbed
// points and returns max over coordinates of |g_ad - g_fd| / max(1, |g_fd|).
// Central differences with step eps; keep clamp kinks away from the point.
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;
double grad_check(const TapeFn& f, const std::vector<Eigen::MatrixXd>& point,
                  double eps = 1e-6);

}  // namespace ncpr::ad
