#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pcdc/common.hpp"

namespace pcdc {

struct Parameter {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    // Adam first/second moment estimates.
    std::vector<double> m;
    std::vector<double> v;

    size_t count() const { return value.size(); }
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

/// Named parameters with Adam state and a frozen set. Iteration order is
/// insertion order, which keeps updates and serialization deterministic.
class ParameterStore {
public:
    Parameter& create(const std::string& name, std::vector<int> shape);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool has(const std::string& name) const;

    const std::vector<std::string>& names() const { return order_; }

    void zero_grads();
    /// Throws TrainingError naming the first parameter with a non-finite grad.
    void check_grads_finite() const;

    void freeze(const std::string& name);
    void unfreeze_all();
    bool is_frozen(const std::string& name) const;
    const std::set<std::string>& frozen() const { return frozen_; }
    void set_frozen(std::set<std::string> f) { frozen_ = std::move(f); }

    /// One Adam update over all non-frozen parameters; moments of frozen
    /// parameters are untouched.
    void adam_step(const AdamConfig& cfg);

    int64_t step_count() const { return adam_t_; }
    void set_step_count(int64_t t) { adam_t_ = t; }

    size_t total_parameters() const;

private:
    std::map<std::string, Parameter> params_;
    std::vector<std::string> order_;
    std::set<std::string> frozen_;
    int64_t adam_t_ = 0;
};

}  // namespace pcdc
