#include "pcdc/optim.hpp"

#include <cmath>

namespace pcdc {

Parameter& ParameterStore::create(const std::string& name, std::vector<int> shape) {
    if (params_.count(name)) throw ConfigError("duplicate parameter: " + name);
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    Parameter p;
    p.name = name;
    p.shape = std::move(shape);
    p.value.assign(n, 0.0);
    p.grad.assign(n, 0.0);
    p.m.assign(n, 0.0);
    p.v.assign(n, 0.0);
    order_.push_back(name);
    return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParameterStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw LookupError("unknown parameter: " + name);
    return it->second;
}

const Parameter& ParameterStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw LookupError("unknown parameter: " + name);
    return it->second;
}

bool ParameterStore::has(const std::string& name) const { return params_.count(name) > 0; }

void ParameterStore::zero_grads() {
    for (auto& [_, p] : params_) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

void ParameterStore::check_grads_finite() const {
    for (const auto& name : order_) {
        const Parameter& p = params_.at(name);
        for (double g : p.grad)
            if (!std::isfinite(g))
                throw TrainingError("non-finite gradient in parameter: " + name);
    }
}

void ParameterStore::freeze(const std::string& name) {
    if (!params_.count(name)) throw LookupError("freeze: unknown parameter: " + name);
    frozen_.insert(name);
}

void ParameterStore::unfreeze_all() { frozen_.clear(); }

bool ParameterStore::is_frozen(const std::string& name) const {
    return frozen_.count(name) > 0;
}

void ParameterStore::adam_step(const AdamConfig& cfg) {
    ++adam_t_;
    double bc1 = 1.0 - std::pow(cfg.beta1, double(adam_t_));
    double bc2 = 1.0 - std::pow(cfg.beta2, double(adam_t_));
    for (const auto& name : order_) {
        if (frozen_.count(name)) continue;
        Parameter& p = params_.at(name);
        for (size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad[i];
            p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
            p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
            double mh = p.m[i] / bc1;
            double vh = p.v[i] / bc2;
            p.value[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        }
    }
}

size_t ParameterStore::total_parameters() const {
    size_t n = 0;
    for (const auto& [_, p] : params_) n += p.count();
    return n;
}

}  // namespace pcdc
