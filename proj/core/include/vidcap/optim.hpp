#pragma once

#include "vidcap/autograd.hpp"
#include "vidcap/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace vidcap {

struct ClipReport {
    double norm_before = 0.0;
    double norm_after = 0.0;
};

/// Rescales all gradients in place so their joint L2 norm is at most max_norm.
ClipReport clip_global_norm(std::span<Tensor* const> grads, double max_norm);
ClipReport clip_global_norm(std::span<Parameter* const> params, double max_norm);

struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    Tensor m;
    Tensor v;
    std::int64_t t = 0;
};

/// One decoupled-weight-decay Adam update of a single tensor. Increments state.t first.
void adamw_update(Tensor& param, const Tensor& grad, AdamWState& state, const AdamWHyper& hyper);

/// AdamW over a fixed, ordered parameter list.
class AdamW {
public:
    AdamW(std::vector<Parameter*> params, AdamWHyper hyper);

    /// Applies one update from each parameter's grad buffer. Frozen parameters are skipped.
    void step();
    void zero_grad();

    const AdamWHyper& hyper() const noexcept { return hyper_; }
    void set_lr(double lr) noexcept { hyper_.lr = lr; }
    const AdamWState& state(std::size_t i) const { return states_.at(i); }

private:
    std::vector<Parameter*> params_;
    std::vector<AdamWState> states_;
    AdamWHyper hyper_;
};

} // namespace vidcap
