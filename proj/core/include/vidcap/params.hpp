#pragma once

#include "vidcap/autograd.hpp"
#include "vidcap/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace vidcap {

/// Named parameters, iterated in ascending name order.
class ParamStore {
public:
    Parameter& add(const std::string& name, Tensor init);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    /// Parameters whose name starts with `prefix`.
    std::vector<Parameter*> with_prefix(const std::string& prefix);

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const;

    void set_trainable(const std::string& prefix, bool trainable);
    void zero_grad();
    /// Rounds every value to float precision (the checkpoint storage format).
    void round_to_float();

private:
    std::map<std::string, Parameter> params_;
};

// Initializers
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor ones(std::size_t n);

/// Linear layer weights living in a ParamStore: `<prefix>.weight` [in, out], `<prefix>.bias` [out].
struct LinearRef {
    Parameter* weight = nullptr;
    Parameter* bias = nullptr;

    static LinearRef create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                            bool with_bias = true);
    Var operator()(Tape& tape, const Var& x) const;
    std::size_t in_features() const { return weight->value.dim(0); }
    std::size_t out_features() const { return weight->value.dim(1); }
};

/// Layer norm over the last axis: `<prefix>.gamma`, `<prefix>.beta`.
struct LayerNormRef {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;
    double eps = 1e-12;

    static LayerNormRef create(ParamStore& store, const std::string& prefix, std::size_t dim, double eps = 1e-12);
    Var operator()(Tape& tape, const Var& x) const;
};

} // namespace vidcap
