#include "ncpr/tape.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ncpr::ad {

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

[[noreturn]] void shape_error(const char* op, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
    throw std::invalid_argument(std::string("tape: ") + op + ": shape mismatch (" +
                                shape_str(a) + " vs " + shape_str(b) + ")");
}

bool same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
}

bool is_1x1(const Eigen::MatrixXd& m) { return m.rows() == 1 && m.cols() == 1; }

// Elementwise binary with 1x1 broadcast on either side.
template <typename F>
Eigen::MatrixXd broadcast_cwise(const char* op, const Eigen::MatrixXd& a,
                                const Eigen::MatrixXd& b, F&& f) {
    if (same_shape(a, b)) return f(a.array(), b.array()).matrix();
    if (is_1x1(a)) {
        Eigen::ArrayXXd av = Eigen::ArrayXXd::Constant(b.rows(), b.cols(), a(0, 0));
        return f(av, b.array()).matrix();
    }
    if (is_1x1(b)) {
        Eigen::ArrayXXd bv = Eigen::ArrayXXd::Constant(a.rows(), a.cols(), b(0, 0));
        return f(a.array(), bv).matrix();
    }
    shape_error(op, a, b);
}

Eigen::MatrixXd expand_like(const Eigen::MatrixXd& m, const Eigen::MatrixXd& like) {
    if (same_shape(m, like)) return m;
    return Eigen::MatrixXd::Constant(like.rows(), like.cols(), m(0, 0));
}

}  // namespace

double Var::scalar() const {
    const Eigen::MatrixXd& v = value();
    if (!is_1x1(v))
        throw std::invalid_argument("tape: scalar() on a " + shape_str(v) + " node");
    return v(0, 0);
}

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
}

const Tape::Node& Tape::at(Var v) const {
    if (v.tape() != this)
        throw std::invalid_argument("tape: Var belongs to a different tape");
    return nodes_.at(static_cast<std::size_t>(v.index()));
}

const Eigen::MatrixXd& Tape::value_of(std::int32_t index) const {
    return nodes_.at(static_cast<std::size_t>(index)).value;
}

void Tape::reset() {
    nodes_.clear();
    adjoints_.clear();
    backward_visits_ = 0;
}

Var Tape::constant(Eigen::MatrixXd value) {
    if (value.size() == 0) throw std::invalid_argument("tape: empty constant");
    return push({Op::Constant, -1, -1, 0.0, std::move(value), {}, {}});
}

Var Tape::constant(double value) {
    return constant(Eigen::MatrixXd::Constant(1, 1, value));
}

Var Tape::input(Eigen::MatrixXd value) {
    if (value.size() == 0) throw std::invalid_argument("tape: empty input");
    return push({Op::Input, -1, -1, 0.0, std::move(value), {}, {}});
}

Var Tape::input(double value) {
    return input(Eigen::MatrixXd::Constant(1, 1, value));
}

Var Tape::add(Var a, Var b) {
    Eigen::MatrixXd v = broadcast_cwise("add", at(a).value, at(b).value,
                                        [](auto x, auto y) { return x + y; });
    return push({Op::Add, a.index(), b.index(), 0.0, std::move(v), {}, {}});
}

Var Tape::sub(Var a, Var b) {
    Eigen::MatrixXd v = broadcast_cwise("sub", at(a).value, at(b).value,
                                        [](auto x, auto y) { return x - y; });
    return push({Op::Sub, a.index(), b.index(), 0.0, std::move(v), {}, {}});
}

Var Tape::mul(Var a, Var b) {
    Eigen::MatrixXd v = broadcast_cwise("mul", at(a).value, at(b).value,
                                        [](auto x, auto y) { return x * y; });
    return push({Op::Mul, a.index(), b.index(), 0.0, std::move(v), {}, {}});
}

Var Tape::div(Var a, Var b) {
    Eigen::MatrixXd v = broadcast_cwise("div", at(a).value, at(b).value,
                                        [](auto x, auto y) { return x / y; });
    return push({Op::Div, a.index(), b.index(), 0.0, std::move(v), {}, {}});
}

Var Tape::matvec(Var a, Var x) {
    const Eigen::MatrixXd& av = at(a).value;
    const Eigen::MatrixXd& xv = at(x).value;
    if (xv.cols() != 1 || av.cols() != xv.rows()) shape_error("matvec", av, xv);
    return push({Op::MatVec, a.index(), x.index(), 0.0, av * xv, {}, {}});
}

Var Tape::matmul(Var a, Var b) {
    const Eigen::MatrixXd& av = at(a).value;
    const Eigen::MatrixXd& bv = at(b).value;
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    return push({Op::MatMul, a.index(), b.index(), 0.0, av * bv, {}, {}});
}

Var Tape::dot(Var x, Var y) {
    const Eigen::MatrixXd& xv = at(x).value;
    const Eigen::MatrixXd& yv = at(y).value;
    if (xv.cols() != 1 || yv.cols() != 1 || xv.rows() != yv.rows())
        shape_error("dot", xv, yv);
    Eigen::MatrixXd v =
        Eigen::MatrixXd::Constant(1, 1, xv.col(0).dot(yv.col(0)));
    return push({Op::Dot, x.index(), y.index(), 0.0, std::move(v), {}, {}});
}

Var Tape::tanh(Var x) {
    Eigen::MatrixXd v = at(x).value.unaryExpr([](double t) { return std::tanh(t); });
    return push({Op::Tanh, x.index(), -1, 0.0, std::move(v), {}, {}});
}

Var Tape::sin(Var x) {
    Eigen::MatrixXd v = at(x).value.unaryExpr([](double t) { return std::sin(t); });
    return push({Op::Sin, x.index(), -1, 0.0, std::move(v), {}, {}});
}

Var Tape::cos(Var x) {
    Eigen::MatrixXd v = at(x).value.unaryExpr([](double t) { return std::cos(t); });
    return push({Op::Cos, x.index(), -1, 0.0, std::move(v), {}, {}});
}

Var Tape::square(Var x) {
    const Eigen::MatrixXd& xv = at(x).value;
    return push({Op::Square, x.index(), -1, 0.0, xv.cwiseProduct(xv), {}, {}});
}

Var Tape::abs(Var x) {
    return push({Op::Abs, x.index(), -1, 0.0, at(x).value.cwiseAbs(), {}, {}});
}

Var Tape::sum(Var x) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(1, 1, at(x).value.sum());
    return push({Op::Sum, x.index(), -1, 0.0, std::move(v), {}, {}});
}

Var Tape::scale(Var x, double factor) {
    return push({Op::Scale, x.index(), -1, factor, factor * at(x).value, {}, {}});
}

Var Tape::clamp(Var x, Eigen::MatrixXd lo, Eigen::MatrixXd hi) {
    const Eigen::MatrixXd& xv = at(x).value;
    if (!(same_shape(lo, xv) || is_1x1(lo))) shape_error("clamp(lo)", xv, lo);
    if (!(same_shape(hi, xv) || is_1x1(hi))) shape_error("clamp(hi)", xv, hi);
    Eigen::MatrixXd lo_full = expand_like(lo, xv);
    Eigen::MatrixXd hi_full = expand_like(hi, xv);
    Eigen::MatrixXd v = xv.cwiseMax(lo_full).cwiseMin(hi_full);
    return push({Op::Clamp, x.index(), -1, 0.0, std::move(v),
                 std::move(lo_full), std::move(hi_full)});
}

Var Tape::clamp(Var x, double lo, double hi) {
    return clamp(x, Eigen::MatrixXd::Constant(1, 1, lo),
                 Eigen::MatrixXd::Constant(1, 1, hi));
}

void Tape::accumulate(std::int32_t index, const Eigen::MatrixXd& delta) {
    Eigen::MatrixXd& adj = adjoints_[static_cast<std::size_t>(index)];
    const Eigen::MatrixXd& shape = nodes_[static_cast<std::size_t>(index)].value;
    if (adj.size() == 0) adj = Eigen::MatrixXd::Zero(shape.rows(), shape.cols());
    if (same_shape(delta, adj)) {
        adj += delta;
    } else if (is_1x1(adj)) {
        adj(0, 0) += delta.sum();   // gradient of a broadcast 1x1 operand
    } else {
        shape_error("accumulate", adj, delta);
    }
}

void Tape::backward(Var loss) {
    const Node& seed = at(loss);
    if (!is_1x1(seed.value))
        throw std::invalid_argument("tape: backward: loss must be scalar, got " +
                                    shape_str(seed.value));
    adjoints_.assign(nodes_.size(), Eigen::MatrixXd());
    adjoints_[static_cast<std::size_t>(loss.index())] = Eigen::MatrixXd::Ones(1, 1);
    backward_visits_ = 0;

    for (std::int32_t i = loss.index(); i >= 0; --i) {
        ++backward_visits_;
        const Eigen::MatrixXd& g = adjoints_[static_cast<std::size_t>(i)];
        if (g.size() == 0) continue;
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        const auto va = [&]() -> const Eigen::MatrixXd& {
            return nodes_[static_cast<std::size_t>(n.a)].value;
        };
        const auto vb = [&]() -> const Eigen::MatrixXd& {
            return nodes_[static_cast<std::size_t>(n.b)].value;
        };

        switch (n.op) {
        case Op::Constant:
        case Op::Input:
            break;
        case Op::Add:
            accumulate(n.a, g);
            accumulate(n.b, g);
            break;
        case Op::Sub:
            accumulate(n.a, g);
            accumulate(n.b, -g);
            break;
        case Op::Mul: {
            Eigen::MatrixXd a = expand_like(va(), n.value);
            Eigen::MatrixXd b = expand_like(vb(), n.value);
            accumulate(n.a, g.cwiseProduct(b));
            accumulate(n.b, g.cwiseProduct(a));
            break;
        }
        case Op::Div: {
            Eigen::MatrixXd a = expand_like(va(), n.value);
            Eigen::MatrixXd b = expand_like(vb(), n.value);
            accumulate(n.a, g.cwiseQuotient(b));
            accumulate(n.b, -g.cwiseProduct(a).cwiseQuotient(b.cwiseProduct(b)));
            break;
        }
        case Op::MatVec:
            accumulate(n.a, g * vb().transpose());
            accumulate(n.b, va().transpose() * g);
            break;
        case Op::MatMul:
            accumulate(n.a, g * vb().transpose());
            accumulate(n.b, va().transpose() * g);
            break;
        case Op::Dot:
            accumulate(n.a, g(0, 0) * vb());
            accumulate(n.b, g(0, 0) * va());
            break;
        case Op::Tanh:
            accumulate(n.a, g.cwiseProduct(
                                (1.0 - n.value.array().square()).matrix()));
            break;
        case Op::Sin:
            accumulate(n.a, g.cwiseProduct(va().array().cos().matrix()));
            break;
        case Op::Cos:
            accumulate(n.a, -g.cwiseProduct(va().array().sin().matrix()));
            break;
        case Op::Square:
            accumulate(n.a, 2.0 * g.cwiseProduct(va()));
            break;
        case Op::Abs:
            accumulate(n.a, g.cwiseProduct(va().unaryExpr([](double t) {
                return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
            })));
            break;
        case Op::Sum:
            accumulate(n.a, Eigen::MatrixXd::Constant(va().rows(), va().cols(),
                                                      g(0, 0)));
            break;
        case Op::Scale:
            accumulate(n.a, n.factor * g);
            break;
        case Op::Clamp: {
            // 1 strictly inside the bounds, 0 at the boundary and outside.
            Eigen::ArrayXXd x = va().array();
            Eigen::ArrayXXd mask =
                ((x > n.lo.array()) && (x < n.hi.array())).cast<double>();
            accumulate(n.a, g.cwiseProduct(mask.matrix()));
            break;
        }
        }
    }
}

Eigen::MatrixXd Tape::grad(Var v) const {
    const Node& n = at(v);
    if (adjoints_.size() != nodes_.size())
        throw std::logic_error("tape: grad() before backward()");
    const Eigen::MatrixXd& adj = adjoints_[static_cast<std::size_t>(v.index())];
    if (adj.size() == 0)
        return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
    return adj;
}

double grad_check(const TapeFn& f, const std::vector<Eigen::MatrixXd>& point,
                  double eps) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(point.size());
    for (const auto& m : point) vars.push_back(tape.input(m));
    Var loss = f(tape, vars);
    tape.backward(loss);
    std::vector<Eigen::MatrixXd> g_ad;
    g_ad.reserve(vars.size());
    for (Var v : vars) g_ad.push_back(tape.grad(v));

    auto eval_at = [&](const std::vector<Eigen::MatrixXd>& p) {
        Tape t;
        std::vector<Var> vs;
        vs.reserve(p.size());
        for (const auto& m : p) vs.push_back(t.input(m));
        return f(t, vs).scalar();
    };

    double max_err = 0.0;
    std::vector<Eigen::MatrixXd> p = point;
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (Eigen::Index r = 0; r < p[i].rows(); ++r) {
            for (Eigen::Index c = 0; c < p[i].cols(); ++c) {
                const double saved = p[i](r, c);
                p[i](r, c) = saved + eps;
                const double fp = eval_at(p);
                p[i](r, c) = saved - eps;
                const double fm = eval_at(p);
                p[i](r, c) = saved;
                const double g_fd = (fp - fm) / (2.0 * eps);
                const double err = std::abs(g_ad[i](r, c) - g_fd) /
                                   std::max(1.0, std::abs(g_fd));
                max_err = std::max(max_err, err);
            }
        }
    }
    return max_err;
}

}  // namespace ncpr::ad
