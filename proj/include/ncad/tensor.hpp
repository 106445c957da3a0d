#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ncad/common.hpp"

namespace ncad {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace autograd {

// Thread-local switch; when off, ops compute values but record no graph.
bool enabled();
void set_enabled(bool on);

struct NoGradGuard {
    NoGradGuard() : prev_(enabled()) { set_enabled(false); }
    ~NoGradGuard() { set_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

}  // namespace autograd

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    bool consumed = false;  // set once backward has run through this root
    const char* op = "leaf";
    std::vector<Tensor> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(TensorNode&)> backward_fn;
    // Auxiliary forward state some backwards need (e.g. argmax indices).
    std::vector<std::int64_t> aux;
};

}  // namespace detail

// Dense real tensor with reverse-mode differentiation. Value semantics over a
// shared node; copies alias the same storage. Scalars are rank-0.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double fill, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::int64_t numel() const;
    std::int64_t dim(std::size_t axis) const;
    bool is_scalar() const;

    std::span<const double> values() const;
    // Mutating values is only legal on leaves (parameters, inputs).
    std::span<double> values_mut();

    bool requires_grad() const;
    void set_requires_grad(bool on);

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> grad_mut();
    void zero_grad();

    double item() const;

    detail::TensorNode& node() const { return *node_; }
    std::shared_ptr<detail::TensorNode> node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op_result(const char* op, Shape shape, std::vector<double> value,
                                 std::vector<Tensor> parents,
                                 std::function<void(detail::TensorNode&)> backward_fn);
};

// --- forward ops ------------------------------------------------------------

// Causal dilated 1-D convolution. x: [B, Cin, T], w: [Cout, Cin, k], b: [Cout].
// Output [B, Cout, T]; position t only sees inputs at times <= t.
Tensor conv1d_causal(const Tensor& x, const Tensor& w, const Tensor& b, std::int64_t dilation);

Tensor leaky_relu(const Tensor& x, double negative_slope);

// x: [B, Fin], w: [Fout, Fin], b: [Fout] -> [B, Fout].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Adaptive max pooling to a single timestep: [B, C, T] -> [B, C].
Tensor max_pool_time(const Tensor& x);

// Row-wise x / sqrt(sum(x^2) + eps): [B, E] -> [B, E] (1-D treated as one row).
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
// c - x elementwise.
Tensor sub_from_scalar(double c, const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Sum over the last axis: [B, E] -> [B] (1-D collapses to a scalar).
Tensor row_sum(const Tensor& x);
// Euclidean norm over the last axis: [B, E] -> [B].
Tensor row_l2_norm(const Tensor& x, double eps = 0.0);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// --- backward ---------------------------------------------------------------

// Reverse-mode sweep from a rank-0 loss. The graph is consumed unless
// retain_graph is set; a second sweep without retain throws.
void backward(const Tensor& loss, bool retain_graph = false);

}  // namespace ncad
