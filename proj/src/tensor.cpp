#include "ncad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ncad {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw ConfigError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace autograd {

namespace {
thread_local bool g_enabled = true;
}

bool enabled() { return g_enabled; }
void set_enabled(bool on) { g_enabled = on; }

}  // namespace autograd

namespace {

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value produced by op '") + op + "'");
        }
    }
}

void ensure_grad(detail::TensorNode& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

}  // namespace

Tensor make_op_result(const char* op, Shape shape, std::vector<double> value,
                      std::vector<Tensor> parents,
                      std::function<void(detail::TensorNode&)> backward_fn) {
    check_finite(op, value);
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    bool needs = false;
    if (autograd::enabled()) {
        for (const auto& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

// --- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
    auto node = std::make_shared<detail::TensorNode>();
    auto n = shape_numel(shape);
    node->shape = std::move(shape);
    node->value.assign(static_cast<std::size_t>(n), fill);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    auto n = shape_numel(shape);
    if (static_cast<std::int64_t>(values.size()) != n) {
        throw ConfigError("value count " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
    }
    check_finite("from_values", values);
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_values({}, {v}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(node_->value.size()); }

std::int64_t Tensor::dim(std::size_t axis) const {
    if (axis >= node_->shape.size()) {
        throw ConfigError("axis " + std::to_string(axis) + " out of range for shape " +
                          shape_str(node_->shape));
    }
    return node_->shape[axis];
}

bool Tensor::is_scalar() const { return node_->shape.empty(); }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::values_mut() {
    if (node_->backward_fn) {
        throw ConfigError("mutating a non-leaf tensor (op '" + std::string(node_->op) +
                          "') would corrupt the recorded graph");
    }
    return node_->value;
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
    if (node_->backward_fn) throw ConfigError("requires_grad can only be toggled on leaves");
    node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw ConfigError("tensor has no gradient; run backward first");
    return node_->grad;
}

std::span<double> Tensor::grad_mut() {
    ensure_grad(*node_);
    return node_->grad;
}

void Tensor::zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (numel() != 1) throw ConfigError("item() on tensor with " + std::to_string(numel()) + " elements");
    return node_->value[0];
}

// --- ops --------------------------------------------------------------------

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.shape().size() != rank) {
        throw ConfigError(std::string(what) + " must have rank " + std::to_string(rank) +
                          ", got shape " + shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
}

}  // namespace

Tensor conv1d_causal(const Tensor& x, const Tensor& w, const Tensor& b, std::int64_t dilation) {
    require_rank(x, 3, "conv1d_causal input");
    require_rank(w, 3, "conv1d_causal weight");
    require_rank(b, 1, "conv1d_causal bias");
    if (dilation < 1) throw ConfigError("conv1d_causal: dilation must be >= 1");
    const auto B = x.dim(0), Cin = x.dim(1), T = x.dim(2);
    const auto Cout = w.dim(0), K = w.dim(2);
    if (w.dim(1) != Cin) {
        throw ConfigError("conv1d_causal: weight expects " + std::to_string(w.dim(1)) +
                          " input channels, input has " + std::to_string(Cin));
    }
    if (b.dim(0) != Cout) throw ConfigError("conv1d_causal: bias size mismatch");

    const auto xv = x.values();
    const auto wv = w.values();
    const auto bv = b.values();
    std::vector<double> out(static_cast<std::size_t>(B * Cout * T));
    // y[b,o,t] = bias[o] + sum_{ci,j} w[o,ci,j] * x[b,ci,t - (K-1-j)*dilation]
    // with zero padding on the left, so tap j = K-1 lands on time t itself.
    for (std::int64_t bi = 0; bi < B; ++bi) {
        for (std::int64_t o = 0; o < Cout; ++o) {
            double* yrow = out.data() + (bi * Cout + o) * T;
            for (std::int64_t t = 0; t < T; ++t) yrow[t] = bv[static_cast<std::size_t>(o)];
            for (std::int64_t ci = 0; ci < Cin; ++ci) {
                const double* xrow = xv.data() + (bi * Cin + ci) * T;
                const double* wrow = wv.data() + (o * Cin + ci) * K;
                for (std::int64_t j = 0; j < K; ++j) {
                    const double wj = wrow[j];
                    if (wj == 0.0) continue;
                    const std::int64_t back = (K - 1 - j) * dilation;
                    for (std::int64_t t = back; t < T; ++t) yrow[t] += wj * xrow[t - back];
                }
            }
        }
    }

    auto bwd = [B, Cin, T, Cout, K, dilation](detail::TensorNode& n) {
        const auto& g = n.grad;
        Tensor xp = n.parents[0], wp = n.parents[1], bp = n.parents[2];
        const auto xv2 = xp.values();
        const auto wv2 = wp.values();
        if (xp.requires_grad()) {
            auto gx = xp.grad_mut();
            for (std::int64_t bi = 0; bi < B; ++bi)
                for (std::int64_t o = 0; o < Cout; ++o) {
                    const double* grow = g.data() + (bi * Cout + o) * T;
                    for (std::int64_t ci = 0; ci < Cin; ++ci) {
                        double* gxrow = gx.data() + (bi * Cin + ci) * T;
                        const double* wrow = wv2.data() + (o * Cin + ci) * K;
                        for (std::int64_t j = 0; j < K; ++j) {
                            const double wj = wrow[j];
                            if (wj == 0.0) continue;
                            const std::int64_t back = (K - 1 - j) * dilation;
                            for (std::int64_t t = back; t < T; ++t) gxrow[t - back] += wj * grow[t];
                        }
                    }
                }
        }
        if (wp.requires_grad()) {
            auto gw = wp.grad_mut();
            for (std::int64_t bi = 0; bi < B; ++bi)
                for (std::int64_t o = 0; o < Cout; ++o) {
                    const double* grow = g.data() + (bi * Cout + o) * T;
                    for (std::int64_t ci = 0; ci < Cin; ++ci) {
                        const double* xrow = xv2.data() + (bi * Cin + ci) * T;
                        double* gwrow = gw.data() + (o * Cin + ci) * K;
                        for (std::int64_t j = 0; j < K; ++j) {
                            const std::int64_t back = (K - 1 - j) * dilation;
                            double acc = 0.0;
                            for (std::int64_t t = back; t < T; ++t) acc += grow[t] * xrow[t - back];
                            gwrow[j] += acc;
                        }
                    }
                }
        }
        if (bp.requires_grad()) {
            auto gb = bp.grad_mut();
            for (std::int64_t bi = 0; bi < B; ++bi)
                for (std::int64_t o = 0; o < Cout; ++o) {
                    const double* grow = g.data() + (bi * Cout + o) * T;
                    double acc = 0.0;
                    for (std::int64_t t = 0; t < T; ++t) acc += grow[t];
                    gb[static_cast<std::size_t>(o)] += acc;
                }
        }
    };
    return make_op_result("conv1d_causal", {B, Cout, T}, std::move(out), {x, w, b}, bwd);
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        out[i] = xv[i] >= 0.0 ? xv[i] : negative_slope * xv[i];
    }
    auto bwd = [negative_slope](detail::TensorNode& n) {
        Tensor xp = n.parents[0];
        if (!xp.requires_grad()) return;
        const auto xv2 = xp.values();
        auto gx = xp.grad_mut();
        for (std::size_t i = 0; i < xv2.size(); ++i) {
            gx[i] += n.grad[i] * (xv2[i] >= 0.0 ? 1.0 : negative_slope);
        }
    };
    return make_op_result("leaky_relu", x.shape(), std::move(out), {x}, bwd);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "linear input");
    require_rank(w, 2, "linear weight");
    require_rank(b, 1, "linear bias");
    const auto B = x.dim(0), Fin = x.dim(1);
    const auto Fout = w.dim(0);
    if (w.dim(1) != Fin) {
        throw ConfigError("linear: weight expects " + std::to_string(w.dim(1)) +
                          " input features, input has " + std::to_string(Fin));
    }
    if (b.dim(0) != Fout) throw ConfigError("linear: bias size mismatch");

    const auto xv = x.values();
    const auto wv = w.values();
    const auto bv = b.values();
    std::vector<double> out(static_cast<std::size_t>(B * Fout));
    for (std::int64_t bi = 0; bi < B; ++bi) {
        const double* xrow = xv.data() + bi * Fin;
        for (std::int64_t o = 0; o < Fout; ++o) {
            const double* wrow = wv.data() + o * Fin;
            double acc = bv[static_cast<std::size_t>(o)];
            for (std::int64_t f = 0; f < Fin; ++f) acc += wrow[f] * xrow[f];
            out[static_cast<std::size_t>(bi * Fout + o)] = acc;
        }
    }
    auto bwd = [B, Fin, Fout](detail::TensorNode& n) {
        const auto& g = n.grad;
        Tensor xp = n.parents[0], wp = n.parents[1], bp = n.parents[2];
        const auto xv2 = xp.values();
        const auto wv2 = wp.values();
        if (xp.requires_grad()) {
            auto gx = xp.grad_mut();
            for (std::int64_t bi = 0; bi < B; ++bi)
                for (std::int64_t o = 0; o < Fout; ++o) {
                    const double go = g[static_cast<std::size_t>(bi * Fout + o)];
                    if (go == 0.0) continue;
                    const double* wrow = wv2.data() + o * Fin;
                    double* gxrow = gx.data() + bi * Fin;
                    for (std::int64_t f = 0; f < Fin; ++f) gxrow[f] += go * wrow[f];
                }
        }
        if (wp.requires_grad()) {
            auto gw = wp.grad_mut();
            for (std::int64_t bi = 0; bi < B; ++bi) {
                const double* xrow = xv2.data() + bi * Fin;
                for (std::int64_t o = 0; o < Fout; ++o) {
                    const double go = g[static_cast<std::size_t>(bi * Fout + o)];
                    if (go == 0.0) continue;
                    double* gwrow = gw.data() + o * Fin;
                    for (std::int64_t f = 0; f < Fin; ++f) gwrow[f] += go * xrow[f];
                }
            }
        }
        if (bp.requires_grad()) {
            auto gb = bp.grad_mut();
            for (std::int64_t bi = 0; bi < B; ++bi)
                for (std::int64_t o = 0; o < Fout; ++o)
                    gb[static_cast<std::size_t>(o)] += g[static_cast<std::size_t>(bi * Fout + o)];
        }
    };
    return make_op_result("linear", {B, Fout}, std::move(out), {x, w, b}, bwd);
}

Tensor max_pool_time(const Tensor& x) {
    require_rank(x, 3, "max_pool_time input");
    const auto B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (T < 1) throw ConfigError("max_pool_time: empty time axis");
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(B * C));
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(B * C));
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
        const double* row = xv.data() + bc * T;
        std::int64_t best = 0;
        for (std::int64_t t = 1; t < T; ++t) {
            if (row[t] > row[best]) best = t;  // first max wins ties
        }
        out[static_cast<std::size_t>(bc)] = row[best];
        argmax[static_cast<std::size_t>(bc)] = best;
    }
    auto bwd = [B, C, T](detail::TensorNode& n) {
        Tensor xp = n.parents[0];
        if (!xp.requires_grad()) return;
        auto gx = xp.grad_mut();
        for (std::int64_t bc = 0; bc < B * C; ++bc) {
            gx[static_cast<std::size_t>(bc * T + n.aux[static_cast<std::size_t>(bc)])] +=
                n.grad[static_cast<std::size_t>(bc)];
        }
    };
    Tensor y = make_op_result("max_pool_time", {B, C}, std::move(out), {x}, bwd);
    y.node().aux = std::move(argmax);
    return y;
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
    const auto& sh = x.shape();
    if (sh.empty() || sh.size() > 2) {
        throw ConfigError("l2_normalize_rows expects rank 1 or 2, got " + shape_str(sh));
    }
    const std::int64_t rows = sh.size() == 2 ? sh[0] : 1;
    const std::int64_t E = sh.size() == 2 ? sh[1] : sh[0];
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = xv.data() + r * E;
        double ss = 0.0;
        for (std::int64_t e = 0; e < E; ++e) ss += row[e] * row[e];
        const double inv = 1.0 / std::sqrt(ss + eps);
        for (std::int64_t e = 0; e < E; ++e) out[static_cast<std::size_t>(r * E + e)] = row[e] * inv;
    }
    auto bwd = [rows, E, eps](detail::TensorNode& n) {
        Tensor xp = n.parents[0];
        if (!xp.requires_grad()) return;
        const auto xv2 = xp.values();
        auto gx = xp.grad_mut();
        // d/dx (x/n) = g/n - x * (x.g) / n^3 with n = sqrt(sum x^2 + eps).
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* row = xv2.data() + r * E;
            const double* grow = n.grad.data() + r * E;
            double ss = 0.0, xg = 0.0;
            for (std::int64_t e = 0; e < E; ++e) {
                ss += row[e] * row[e];
                xg += row[e] * grow[e];
            }
            const double nrm = std::sqrt(ss + eps);
            const double inv = 1.0 / nrm;
            const double inv3 = inv * inv * inv;
            double* gxrow = gx.data() + r * E;
            for (std::int64_t e = 0; e < E; ++e) {
                gxrow[e] += grow[e] * inv - row[e] * xg * inv3;
            }
        }
    };
    return make_op_result("l2_normalize_rows", sh, std::move(out), {x}, bwd);
}

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise_binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Bwd dfd) {
    require_same_shape(a, b, op);
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i], bv[i]);
    auto bwd = [dfd](detail::TensorNode& n) {
        Tensor ap = n.parents[0], bp = n.parents[1];
        const auto av2 = ap.values();
        const auto bv2 = bp.values();
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            auto [da, db] = dfd(av2[i], bv2[i]);
            if (ap.requires_grad()) ap.grad_mut()[i] += n.grad[i] * da;
            if (bp.requires_grad()) bp.grad_mut()[i] += n.grad[i] * db;
        }
    };
    return make_op_result(op, a.shape(), std::move(out), {a, b}, bwd);
}

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(const char* op, const Tensor& x, Fwd fwd, Bwd dfd) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
    auto bwd = [dfd](detail::TensorNode& n) {
        Tensor xp = n.parents[0];
        if (!xp.requires_grad()) return;
        const auto xv2 = xp.values();
        auto gx = xp.grad_mut();
        for (std::size_t i = 0; i < n.grad.size(); ++i) gx[i] += n.grad[i] * dfd(xv2[i], n.value[i]);
    };
    return make_op_result(op, x.shape(), std::move(out), {x}, bwd);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise_binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y) { return std::pair{y, x}; });
}

Tensor neg(const Tensor& x) {
    return elementwise_unary(
        "neg", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
    return elementwise_unary(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    return elementwise_unary(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
    return elementwise_unary(
        "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor scale(const Tensor& x, double c) {
    return elementwise_unary(
        "scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
    return elementwise_unary(
        "add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor sub_from_scalar(double c, const Tensor& x) {
    return elementwise_unary(
        "sub_from_scalar", x, [c](double v) { return c - v; }, [](double, double) { return -1.0; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError("clamp: lo must not exceed hi");
    // Gradient passes through strictly inside [lo, hi] and is cut at the rails.
    return elementwise_unary(
        "clamp", x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor row_sum(const Tensor& x) {
    const auto& sh = x.shape();
    if (sh.empty() || sh.size() > 2) {
        throw ConfigError("row_sum expects rank 1 or 2, got " + shape_str(sh));
    }
    const std::int64_t rows = sh.size() == 2 ? sh[0] : 1;
    const std::int64_t E = sh.size() == 2 ? sh[1] : sh[0];
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::int64_t e = 0; e < E; ++e) acc += xv[static_cast<std::size_t>(r * E + e)];
        out[static_cast<std::size_t>(r)] = acc;
    }
    Shape oshape = sh.size() == 2 ? Shape{rows} : Shape{};
    auto bwd = [rows, E](detail::TensorNode& n) {
        Tensor xp = n.parents[0];
        if (!xp.requires_grad()) return;
        auto gx = xp.grad_mut();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t e = 0; e < E; ++e)
                gx[static_cast<std::size_t>(r * E + e)] += n.grad[static_cast<std::size_t>(r)];
    };
    return make_op_result("row_sum", std::move(oshape), std::move(out), {x}, bwd);
}

Tensor row_l2_norm(const Tensor& x, double eps) {
    const auto& sh = x.shape();
    if (sh.empty() || sh.size() > 2) {
        throw ConfigError("row_l2_norm expects rank 1 or 2, got " + shape_str(sh));
    }
    const std::int64_t rows = sh.size() == 2 ? sh[0] : 1;
    const std::int64_t E = sh.size() == 2 ? sh[1] : sh[0];
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        double ss = 0.0;
        for (std::int64_t e = 0; e < E; ++e) {
            const double v = xv[static_cast<std::size_t>(r * E + e)];
            ss += v * v;
        }
        out[static_cast<std::size_t>(r)] = std::sqrt(ss + eps);
    }
    Shape oshape = sh.size() == 2 ? Shape{rows} : Shape{};
    auto bwd = [rows, E](detail::TensorNode& n) {
        Tensor xp = n.parents[0];
        if (!xp.requires_grad()) return;
        const auto xv2 = xp.values();
        auto gx = xp.grad_mut();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double nrm = n.value[static_cast<std::size_t>(r)];
            if (nrm == 0.0) continue;  // subgradient 0 at the origin
            const double go = n.grad[static_cast<std::size_t>(r)] / nrm;
            for (std::int64_t e = 0; e < E; ++e)
                gx[static_cast<std::size_t>(r * E + e)] += go * xv2[static_cast<std::size_t>(r * E + e)];
        }
    };
    return make_op_result("row_l2_norm", std::move(oshape), std::move(out), {x}, bwd);
}

Tensor sum_all(const Tensor& x) {
    const auto xv = x.values();
    double acc = 0.0;
    for (double v : xv) acc += v;
    auto bwd = [](detail::TensorNode& n) {
        Tensor xp = n.parents[0];
        if (!xp.requires_grad()) return;
        auto gx = xp.grad_mut();
        for (auto& g : gx) g += n.grad[0];
    };
    return make_op_result("sum_all", {}, {acc}, {x}, bwd);
}

Tensor mean_all(const Tensor& x) {
    const auto n = x.numel();
    if (n == 0) throw ConfigError("mean_all on empty tensor");
    const auto xv = x.values();
    double acc = 0.0;
    for (double v : xv) acc += v;
    acc /= static_cast<double>(n);
    auto bwd = [n](detail::TensorNode& nd) {
        Tensor xp = nd.parents[0];
        if (!xp.requires_grad()) return;
        auto gx = xp.grad_mut();
        const double g = nd.grad[0] / static_cast<double>(n);
        for (auto& v : gx) v += g;
    };
    return make_op_result("mean_all", {}, {acc}, {x}, bwd);
}

// --- backward ---------------------------------------------------------------

void backward(const Tensor& loss, bool retain_graph) {
    if (!loss.defined()) throw ConfigError("backward on undefined tensor");
    if (!loss.is_scalar()) {
        throw ConfigError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) {
        throw ConfigError("backward on a tensor that does not require grad");
    }
    auto& root = loss.node();
    if (root.consumed) {
        throw ConfigError("backward called twice on a graph built without retain_graph");
    }

    // Depth-first topological order over the recorded graph.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
    stack.emplace_back(&root, 0);
    seen.insert(&root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::TensorNode* p = &node->parents[next].node();
            ++next;
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior grads are scratch for this sweep; leaf grads accumulate across
    // sweeps and are cleared by the caller (optimizer zero_grad).
    for (auto* n : order) {
        ensure_grad(*n);
        if (n->backward_fn) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    if (root.backward_fn) {
        root.grad[0] = 1.0;
    } else {
        root.grad[0] += 1.0;
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }

    if (!retain_graph) {
        root.consumed = true;
        for (auto* n : order) {
            if (n == &root) continue;
            n->backward_fn = nullptr;
            n->parents.clear();
            n->aux.clear();
            n->aux.shrink_to_fit();
        }
        // Keep the root's links cleared too; its consumed flag guards reuse.
        root.backward_fn = nullptr;
        root.parents.clear();
        root.aux.clear();
    }
}

}  // namespace ncad
