#pragma once

#include <string>
#include <vector>

#include "ncad/tensor.hpp"

namespace ncad {

// Named, ordered collection of trainable tensors. Order is insertion order and
// is part of the determinism contract (optimizer state and checkpoints align
// by it).
class ParameterSet {
public:
    void add(const std::string& name, Tensor tensor);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    std::int64_t total_elements() const;

    void zero_grad();

    struct Entry {
        std::string name;
        Tensor tensor;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

    // Deep copy: fresh leaf tensors sharing nothing with this set.
    ParameterSet clone() const;

private:
    std::vector<Entry> entries_;
};

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], the usual dense-layer default.
void init_uniform_fanin(Tensor& weight, std::int64_t fan_in, Rng& rng);

// Global-norm gradient clipping; returns the pre-clip norm.
double clip_grad_norm(ParameterSet& params, double max_norm);

enum class OptimizerVariant { adam, yogi };

OptimizerVariant optimizer_variant_from_string(const std::string& s);
std::string to_string(OptimizerVariant v);

struct OptimizerConfig {
    OptimizerVariant variant = OptimizerVariant::yogi;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam / YOGI. The two share first-moment and bias-corrected update rules and
// differ only in the second-moment accumulator:
//   adam: v <- b2*v + (1-b2)*g^2
//   yogi: v <- v - (1-b2)*sign(v - g^2)*g^2
// Both reduce to v = (1-b2)*g^2 on the first step from zero state.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config) : config_(config) {}

    void step(ParameterSet& params);
    std::int64_t steps_taken() const { return t_; }
    const OptimizerConfig& config() const { return config_; }

private:
    OptimizerConfig config_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;  // aligned with params by index
};

}  // namespace ncad
