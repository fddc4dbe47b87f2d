#include "vidcap/params.hpp"

#include <cmath>
#include <stdexcept>

namespace vidcap {

Parameter& ParamStore::add(const std::string& name, Tensor init) {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    it->second.name = name;
    it->second.value = std::move(init);
    it->second.zero_grad();
    return it->second;
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& [_, p] : params_) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> ParamStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& [_, p] : params_) out.push_back(&p);
    return out;
}

std::vector<Parameter*> ParamStore::with_prefix(const std::string& prefix) {
    std::vector<Parameter*> out;
    for (auto& [name, p] : params_) {
        if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(&p);
    }
    return out;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.numel();
    return n;
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
    for (auto* p : with_prefix(prefix)) p->trainable = trainable;
}

void ParamStore::zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
}

void ParamStore::round_to_float() {
    for (auto& [_, p] : params_) {
        for (double& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
    }
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rand_uniform({fan_in, fan_out}, rng, -a, a);
}

Tensor ones(std::size_t n) { return Tensor({n}, 1.0); }

LinearRef LinearRef::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng,
                            bool with_bias) {
    LinearRef ref;
    ref.weight = &store.add(prefix + ".weight", xavier_uniform(in, out, rng));
    if (with_bias) ref.bias = &store.add(prefix + ".bias", Tensor({out}));
    return ref;
}

Var LinearRef::operator()(Tape& tape, const Var& x) const {
    Var y = ag::matmul(x, tape.param(*weight));
    return bias ? ag::add_bias(y, tape.param(*bias)) : y;
}

LayerNormRef LayerNormRef::create(ParamStore& store, const std::string& prefix, std::size_t dim, double eps) {
    LayerNormRef ref;
    ref.gamma = &store.add(prefix + ".gamma", ones(dim));
    ref.beta = &store.add(prefix + ".beta", Tensor({dim}));
    ref.eps = eps;
    return ref;
}

Var LayerNormRef::operator()(Tape& tape, const Var& x) const {
    return ag::layer_norm(x, tape.param(*gamma), tape.param(*beta), eps);
}

} // namespace vidcap
