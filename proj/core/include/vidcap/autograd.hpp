#pragma once

#include "vidcap/tensor.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vidcap {

class Tape;

/// Trainable tensor with its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    void zero_grad() { grad = Tensor(value.shape()); }
};

/// Handle to a node recorded on a Tape.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t numel() const { return value().numel(); }
    std::size_t id() const noexcept { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const noexcept { return tape_ != nullptr; }
    bool requires_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Gradient per requires-grad leaf, keyed by node id.
using GradMap = std::unordered_map<std::size_t, Tensor>;

/// Ordered record of primitive applications. Node ids are assigned in
/// recording order, so every input id precedes its consumer.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var leaf(Tensor value);
    /// Binds a parameter once per tape; later calls return the same node.
    Var param(Parameter& p);

    Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient buffer of a node, zero-allocated on first access.
    Tensor& grad(std::size_t id);
    bool has_grad(std::size_t id) const { return nodes_[id].grad.has_value(); }
    std::size_t input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }
    std::string_view op(std::size_t id) const { return nodes_[id].op; }

    std::size_t size() const noexcept { return nodes_.size(); }

    /// Reverse-mode sweep from a scalar loss. Returns a gradient for every
    /// requires-grad leaf (zeros when the loss does not depend on it).
    GradMap backward(const Var& loss);

    /// Adds leaf gradients into the bound parameters' grad buffers.
    void accumulate_param_grads(const GradMap& grads);

private:
    struct Node {
        std::string_view op;
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        std::optional<Tensor> grad;
        bool requires_grad = false;
        Parameter* source = nullptr;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> bound_;
};

inline GradMap backward(const Var& loss, Tape& tape) { return tape.backward(loss); }

namespace ag {

// Elementwise arithmetic. Operands must have equal shapes, or one must hold a single element.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);

Var relu(const Var& x);
/// tanh approximation
Var gelu(const Var& x);
Var sigmoid(const Var& x);

/// a: [..., n, k]; b: [k, m] or [..., k, m] with the same leading dims.
Var matmul(const Var& a, const Var& b);
/// x: [..., d] plus bias b: [d] on every row.
Var add_bias(const Var& x, const Var& b);
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Gathers rows along axis 0 of `table`. Output shape [ids.size(), table.shape[1:]...].
Var embedding(const Var& table, const std::vector<std::size_t>& ids);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& axes);

Var sum(const Var& x);
Var mean(const Var& x);
/// Reductions drop the reduced axis.
Var mean(const Var& x, std::size_t axis);
Var max(const Var& x, std::size_t axis);

/// Inverted dropout. With rng == nullptr or rate == 0 this is the identity.
Var dropout(const Var& x, double rate, Rng* rng);

Var softmax(const Var& x, std::size_t axis);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-12);

/// Mean over non-ignored positions of -log softmax(logits[i])[targets[i]].
Var cross_entropy_masked(const Var& logits, const std::vector<int>& targets, int ignore_id);
/// Mean binary cross-entropy on logits, stable form.
Var bce_with_logits(const Var& logits, const Tensor& targets);

} // namespace ag
} // namespace vidcap
