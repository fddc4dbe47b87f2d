#include "vidcap/optim.hpp"

#include "vidcap/error.hpp"

#include <cmath>
#include <stdexcept>

namespace vidcap {

ClipReport clip_global_norm(std::span<Tensor* const> grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
    double sq = 0.0;
    for (const Tensor* g : grads) {
        for (double v : g->data()) sq += v * v;
    }
    ClipReport report;
    report.norm_before = std::sqrt(sq);
    report.norm_after = report.norm_before;
    if (report.norm_before > max_norm) {
        const double factor = max_norm / report.norm_before;
        double sq_after = 0.0;
        for (Tensor* g : grads) {
            for (double& v : g->data()) {
                v *= factor;
                sq_after += v * v;
            }
        }
        report.norm_after = std::sqrt(sq_after);
    }
    return report;
}

ClipReport clip_global_norm(std::span<Parameter* const> params, double max_norm) {
    std::vector<Tensor*> grads;
    grads.reserve(params.size());
    for (Parameter* p : params) {
        if (p->trainable && p->grad.shape() == p->value.shape()) grads.push_back(&p->grad);
    }
    return clip_global_norm(std::span<Tensor* const>(grads), max_norm);
}

void adamw_update(Tensor& param, const Tensor& grad, AdamWState& state, const AdamWHyper& hyper) {
    if (grad.shape() != param.shape()) throw std::invalid_argument("adamw: gradient shape mismatch");
    if (!grad.all_finite()) throw NumericError("adamw: non-finite gradient");
    if (state.m.shape() != param.shape()) {
        state.m = Tensor(param.shape());
        state.v = Tensor(param.shape());
        state.t = 0;
    }
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);
    auto p = param.data();
    auto g = grad.data();
    auto m = state.m.data();
    auto v = state.v.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
        v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        p[i] -= hyper.lr * (m_hat / (std::sqrt(v_hat) + hyper.eps) + hyper.weight_decay * p[i]);
    }
}

AdamW::AdamW(std::vector<Parameter*> params, AdamWHyper hyper)
    : params_(std::move(params)), states_(params_.size()), hyper_(hyper) {}

void AdamW::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        if (!p.trainable) continue;
        if (p.grad.shape() != p.value.shape()) p.zero_grad();
        adamw_update(p.value, p.grad, states_[i], hyper_);
    }
}

void AdamW::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

} // namespace vidcap
