#include "ncad/optim.hpp"

#include <algorithm>
#include <cmath>

namespace ncad {

void ParameterSet::add(const std::string& name, Tensor tensor) {
    if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    if (!tensor.defined()) throw ConfigError("undefined tensor for parameter '" + name + "'");
    tensor.set_requires_grad(true);
    entries_.push_back({name, std::move(tensor)});
}

Tensor& ParameterSet::at(const std::string& name) {
    for (auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ConfigError("unknown parameter '" + name + "'");
}

const Tensor& ParameterSet::at(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ConfigError("unknown parameter '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return e.name == name; });
}

std::int64_t ParameterSet::total_elements() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

ParameterSet ParameterSet::clone() const {
    ParameterSet out;
    for (const auto& e : entries_) {
        auto values = e.tensor.values();
        out.add(e.name, Tensor::from_values(e.tensor.shape(),
                                            std::vector<double>(values.begin(), values.end())));
    }
    return out;
}

void init_uniform_fanin(Tensor& weight, std::int64_t fan_in, Rng& rng) {
    if (fan_in < 1) throw ConfigError("fan_in must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : weight.values_mut()) v = rng.uniform(-bound, bound);
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
    if (max_norm <= 0.0) throw ConfigError("clip_grad_norm: max_norm must be positive");
    double ss = 0.0;
    for (auto& e : params.entries()) {
        if (!e.tensor.has_grad()) continue;
        for (double g : e.tensor.grad()) ss += g * g;
    }
    const double norm = std::sqrt(ss);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& e : params.entries()) {
            if (!e.tensor.has_grad()) continue;
            for (auto& g : e.tensor.grad_mut()) g *= scale;
        }
    }
    return norm;
}

OptimizerVariant optimizer_variant_from_string(const std::string& s) {
    if (s == "adam") return OptimizerVariant::adam;
    if (s == "yogi") return OptimizerVariant::yogi;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam or yogi)");
}

std::string to_string(OptimizerVariant v) {
    return v == OptimizerVariant::adam ? "adam" : "yogi";
}

void Optimizer::step(ParameterSet& params) {
    auto& entries = params.entries();
    if (m_.empty()) {
        m_.resize(entries.size());
        v_.resize(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            m_[i].assign(static_cast<std::size_t>(entries[i].tensor.numel()), 0.0);
            v_[i].assign(static_cast<std::size_t>(entries[i].tensor.numel()), 0.0);
        }
    }
    if (m_.size() != entries.size()) {
        throw ConfigError("optimizer state does not match parameter set");
    }

    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));

    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& tensor = entries[i].tensor;
        if (static_cast<std::int64_t>(m_[i].size()) != tensor.numel()) {
            throw ConfigError("parameter '" + entries[i].name + "' changed shape mid-training");
        }
        auto grads = tensor.grad_mut();  // allocates zeros if backward never reached it
        for (double g : grads) {
            if (!std::isfinite(g)) {
                throw NumericError("non-finite gradient for parameter '" + entries[i].name +
                                   "' at step " + std::to_string(t_));
            }
        }
        auto vals = tensor.values_mut();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < vals.size(); ++j) {
            const double g = grads[j];
            const double g2 = g * g;
            m[j] = b1 * m[j] + (1.0 - b1) * g;
            if (config_.variant == OptimizerVariant::adam) {
                v[j] = b2 * v[j] + (1.0 - b2) * g2;
            } else {
                const double d = v[j] - g2;
                const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                v[j] = v[j] - (1.0 - b2) * sgn * g2;
            }
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            vals[j] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

}  // namespace ncad
