#include "vidcap/autograd.hpp"

#include "vidcap/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vidcap {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{"constant", std::move(value), {}, {}, std::nullopt, false, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{"leaf", std::move(value), {}, {}, std::nullopt, true, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
    nodes_.push_back(Node{"param", p.value, {}, {}, std::nullopt, p.trainable, &p});
    bound_.emplace(&p, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
    Node node;
    node.op = op;
    node.value = std::move(value);
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) {
        if (&in.tape() != this) throw std::invalid_argument("operand recorded on a different tape");
        node.inputs.push_back(in.id());
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
    auto& node = nodes_[id];
    if (!node.grad) node.grad = Tensor(node.value.shape());
    return *node.grad;
}

GradMap Tape::backward(const Var& loss) {
    if (&loss.tape() != this) throw std::invalid_argument("loss recorded on a different tape");
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    for (auto& n : nodes_) n.grad.reset();
    grad(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& node = nodes_[i];
        if (node.requires_grad && node.grad && node.backward) node.backward(*this, i);
    }
    GradMap out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& node = nodes_[i];
        if (!node.inputs.empty() || !node.requires_grad) continue;
        out.emplace(i, node.grad ? *node.grad : Tensor(node.value.shape()));
    }
    return out;
}

void Tape::accumulate_param_grads(const GradMap& grads) {
    for (const auto& [id, g] : grads) {
        Parameter* p = nodes_[id].source;
        if (!p) continue;
        if (p->grad.shape() != p->value.shape()) p->zero_grad();
        auto dst = p->grad.data();
        auto src = g.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
}

namespace ag {
namespace {

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t n = 1;
    std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
    if (axis >= s.size()) throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    AxisSplit r;
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    r.n = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
    Shape out = s;
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    return out;
}

enum class Bcast { Same, ScalarA, ScalarB };

Bcast check_binary(const Var& a, const Var& b, const char* op) {
    if (a.shape() == b.shape()) return Bcast::Same;
    if (a.numel() == 1) return Bcast::ScalarA;
    if (b.numel() == 1) return Bcast::ScalarB;
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
}

void add_into(Tensor& dst, std::span<const double> src, double factor = 1.0) {
    auto d = dst.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * src[i];
}

// Applies a permutation of axes to a dense tensor.
Tensor permute_tensor(const Tensor& x, const std::vector<std::size_t>& axes) {
    const auto& in = x.shape();
    const std::size_t r = in.size();
    Shape out_shape(r);
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];
    std::vector<std::size_t> stride_for_out(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = in[axes[i]];
        stride_for_out[i] = in_strides[axes[i]];
    }
    Tensor out(out_shape);
    auto src = x.data();
    auto dst = out.data();
    std::vector<std::size_t> idx(r, 0);
    std::size_t offset = 0;
    for (std::size_t flat = 0; flat < dst.size(); ++flat) {
        dst[flat] = src[offset];
        for (std::size_t ax = r; ax-- > 0;) {
            ++idx[ax];
            offset += stride_for_out[ax];
            if (idx[ax] < out_shape[ax]) break;
            offset -= stride_for_out[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    return out;
}

// C[n,m] (+)= A[n,k] * B[k,m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = c + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[n,k] += G[n,m] * B[k,m]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t n, std::size_t m, std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = g + i * m;
            const double* brow = b + p * m;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            c[i * k + p] += acc;
        }
    }
}

// C[k,m] += A[n,k]^T * G[n,m]
void gemm_tn(const double* a, const double* g, double* c, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            double* crow = c + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * grow[j];
        }
    }
}

constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

} // namespace

Var add(const Var& a, const Var& b) {
    const Bcast mode = check_binary(a, b, "add");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out(mode == Bcast::ScalarA ? bv.shape() : av.shape());
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = av[mode == Bcast::ScalarA ? 0 : i] + bv[mode == Bcast::ScalarB ? 0 : i];
    }
    return a.tape().record("add", std::move(out), {a, b}, [mode](Tape& t, std::size_t self) {
        const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
        const Tensor& g = t.grad(self);
        auto reduce = [&](std::size_t id, bool scalar) {
            if (!t.requires_grad(id)) return;
            Tensor& gi = t.grad(id);
            if (scalar) {
                double s = 0.0;
                for (double v : g.data()) s += v;
                gi[0] += s;
            } else {
                add_into(gi, g.data());
            }
        };
        reduce(ia, mode == Bcast::ScalarA);
        reduce(ib, mode == Bcast::ScalarB);
    });
}

Var sub(const Var& a, const Var& b) { return add(a, scale(b, -1.0)); }

Var mul(const Var& a, const Var& b) {
    const Bcast mode = check_binary(a, b, "mul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out(mode == Bcast::ScalarA ? bv.shape() : av.shape());
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = av[mode == Bcast::ScalarA ? 0 : i] * bv[mode == Bcast::ScalarB ? 0 : i];
    }
    return a.tape().record("mul", std::move(out), {a, b}, [mode](Tape& t, std::size_t self) {
        const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
        const Tensor& g = t.grad(self);
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        const std::size_t n = g.numel();
        if (t.requires_grad(ia)) {
            Tensor& ga = t.grad(ia);
            for (std::size_t i = 0; i < n; ++i) {
                ga[mode == Bcast::ScalarA ? 0 : i] += g[i] * bv[mode == Bcast::ScalarB ? 0 : i];
            }
        }
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad(ib);
            for (std::size_t i = 0; i < n; ++i) {
                gb[mode == Bcast::ScalarB ? 0 : i] += g[i] * av[mode == Bcast::ScalarA ? 0 : i];
            }
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a.value();
    out.set_requires_grad(false);
    for (auto& v : out.data()) v *= c;
    return a.tape().record("scale", std::move(out), {a}, [c](Tape& t, std::size_t self) {
        add_into(t.grad(t.input(self, 0)), t.grad(self).data(), c);
    });
}

Var relu(const Var& x) {
    Tensor out = x.value();
    out.set_requires_grad(false);
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return x.tape().record("relu", std::move(out), {x}, [](Tape& t, std::size_t self) {
        const std::size_t in = t.input(self, 0);
        const Tensor& xv = t.value(in);
        const Tensor& g = t.grad(self);
        Tensor& gi = t.grad(in);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            if (xv[i] > 0.0) gi[i] += g[i];
        }
    });
}

Var gelu(const Var& x) {
    Tensor out = x.value();
    out.set_requires_grad(false);
    for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    return x.tape().record("gelu", std::move(out), {x}, [](Tape& t, std::size_t self) {
        const std::size_t in = t.input(self, 0);
        const Tensor& xv = t.value(in);
        const Tensor& g = t.grad(self);
        Tensor& gi = t.grad(in);
        for (std::size_t i = 0; i < g.numel(); ++i) {
            const double v = xv[i];
            const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            const double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            gi[i] += g[i] * d;
        }
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x.value();
    out.set_requires_grad(false);
    for (auto& v : out.data()) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    return x.tape().record("sigmoid", std::move(out), {x}, [](Tape& t, std::size_t self) {
        const Tensor& y = t.value(self);
        const Tensor& g = t.grad(self);
        Tensor& gi = t.grad(t.input(self, 0));
        for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var matmul(const Var& a, const Var& b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() < 2 || bs.size() < 2) throw std::invalid_argument("matmul: operands must have rank >= 2");
    const std::size_t n = as[as.size() - 2];
    const std::size_t k = as[as.size() - 1];
    const std::size_t m = bs[bs.size() - 1];
    if (bs[bs.size() - 2] != k) {
        throw std::invalid_argument("matmul: inner dims differ " + shape_str(as) + " x " + shape_str(bs));
    }
    const bool shared_b = bs.size() == 2;
    if (!shared_b && (bs.size() != as.size() || !std::equal(as.begin(), as.end() - 2, bs.begin()))) {
        throw std::invalid_argument("matmul: batch dims differ " + shape_str(as) + " x " + shape_str(bs));
    }
    const std::size_t batch = shape_numel(as) / (n * k);
    Shape out_shape(as.begin(), as.end() - 1);
    out_shape.push_back(m);
    Tensor out(out_shape);
    const double* ap = a.value().data().data();
    const double* bp = b.value().data().data();
    double* cp = out.data().data();
    if (shared_b) {
        gemm_nn(ap, bp, cp, batch * n, k, m);
    } else {
        for (std::size_t i = 0; i < batch; ++i) gemm_nn(ap + i * n * k, bp + i * k * m, cp + i * n * m, n, k, m);
    }
    return a.tape().record("matmul", std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
        const std::size_t ia = t.input(self, 0), ib = t.input(self, 1);
        const double* g = t.grad(self).data().data();
        const double* av = t.value(ia).data().data();
        const double* bv = t.value(ib).data().data();
        if (t.requires_grad(ia)) {
            double* ga = t.grad(ia).data().data();
            if (shared_b) {
                gemm_nt(g, bv, ga, batch * n, m, k);
            } else {
                for (std::size_t i = 0; i < batch; ++i) gemm_nt(g + i * n * m, bv + i * k * m, ga + i * n * k, n, m, k);
            }
        }
        if (t.requires_grad(ib)) {
            double* gb = t.grad(ib).data().data();
            if (shared_b) {
                gemm_tn(av, g, gb, batch * n, k, m);
            } else {
                for (std::size_t i = 0; i < batch; ++i) gemm_tn(av + i * n * k, g + i * n * m, gb + i * k * m, n, k, m);
            }
        }
    });
}

Var add_bias(const Var& x, const Var& b) {
    const Shape& xs = x.shape();
    if (b.shape().size() != 1 || xs.empty() || xs.back() != b.shape()[0]) {
        throw std::invalid_argument("add_bias: bias " + shape_str(b.shape()) + " does not match " + shape_str(xs));
    }
    const std::size_t d = xs.back();
    Tensor out = x.value();
    out.set_requires_grad(false);
    const Tensor& bv = b.value();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i % d];
    return x.tape().record("add_bias", std::move(out), {x, b}, [d](Tape& t, std::size_t self) {
        const std::size_t ix = t.input(self, 0), ib = t.input(self, 1);
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ix)) add_into(t.grad(ix), g.data());
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad(ib);
            for (std::size_t i = 0; i < g.numel(); ++i) gb[i % d] += g[i];
        }
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) { return add_bias(matmul(x, weight), bias); }

Var embedding(const Var& table, const std::vector<std::size_t>& ids) {
    const Shape& ts = table.shape();
    if (ts.empty()) throw std::invalid_argument("embedding: table must have rank >= 1");
    const std::size_t rows = ts[0];
    const std::size_t width = table.numel() / std::max<std::size_t>(rows, 1);
    Shape out_shape = ts;
    out_shape[0] = ids.size();
    Tensor out(out_shape);
    const Tensor& tv = table.value();
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= rows) throw std::out_of_range("embedding: id " + std::to_string(ids[r]) + " >= " + std::to_string(rows));
        std::copy_n(tv.data().begin() + static_cast<std::ptrdiff_t>(ids[r] * width), width,
                    out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    return table.tape().record("embedding", std::move(out), {table}, [ids, width](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gt = t.grad(t.input(self, 0));
        for (std::size_t r = 0; r < ids.size(); ++r) {
            for (std::size_t j = 0; j < width; ++j) gt[ids[r] * width + j] += g[r * width + j];
        }
    });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    Shape out_shape = parts[0].shape();
    if (axis >= out_shape.size()) throw std::invalid_argument("concat: axis out of range");
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != out_shape.size()) throw std::invalid_argument("concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i != axis && s[i] != out_shape[i]) throw std::invalid_argument("concat: shape mismatch off-axis");
        }
        total += s[axis];
    }
    out_shape[axis] = total;
    const AxisSplit sp = split_axis(out_shape, axis);
    Tensor out(out_shape);
    std::vector<std::size_t> widths;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.shape()[axis] * sp.inner;
        const Tensor& pv = p.value();
        for (std::size_t o = 0; o < sp.outer; ++o) {
            std::copy_n(pv.data().begin() + static_cast<std::ptrdiff_t>(o * w), w,
                        out.data().begin() + static_cast<std::ptrdiff_t>(o * total * sp.inner + offset));
        }
        widths.push_back(w);
        offset += w;
    }
    const std::size_t row = total * sp.inner;
    return parts[0].tape().record("concat", std::move(out), parts, [widths, sp, row](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            const std::size_t in = t.input(self, k);
            const std::size_t w = widths[k];
            if (t.requires_grad(in)) {
                Tensor& gi = t.grad(in);
                for (std::size_t o = 0; o < sp.outer; ++o) {
                    for (std::size_t j = 0; j < w; ++j) gi[o * w + j] += g[o * row + off + j];
                }
            }
            off += w;
        }
    });
}

Var reshape(const Var& x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    return x.tape().record("reshape", std::move(out), {x}, [](Tape& t, std::size_t self) {
        add_into(t.grad(t.input(self, 0)), t.grad(self).data());
    });
}

Var permute(const Var& x, const std::vector<std::size_t>& axes) {
    const std::size_t r = x.shape().size();
    if (axes.size() != r) throw std::invalid_argument("permute: axes count != rank");
    std::vector<std::size_t> inverse(r, r);
    for (std::size_t i = 0; i < r; ++i) {
        if (axes[i] >= r || inverse[axes[i]] != r) throw std::invalid_argument("permute: axes are not a permutation");
        inverse[axes[i]] = i;
    }
    Tensor out = permute_tensor(x.value(), axes);
    return x.tape().record("permute", std::move(out), {x}, [inverse](Tape& t, std::size_t self) {
        Tensor back = permute_tensor(t.grad(self), inverse);
        add_into(t.grad(t.input(self, 0)), back.data());
    });
}

Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return x.tape().record("sum", Tensor::scalar(s), {x}, [](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (auto& v : t.grad(t.input(self, 0)).data()) v += g;
    });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Var mean(const Var& x, std::size_t axis) {
    const AxisSplit sp = split_axis(x.shape(), axis);
    if (sp.n == 0) throw std::invalid_argument("mean: empty axis");
    Tensor out(drop_axis(x.shape(), axis));
    const Tensor& xv = x.value();
    const double inv = 1.0 / static_cast<double>(sp.n);
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t j = 0; j < sp.n; ++j) {
            for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += xv[(o * sp.n + j) * sp.inner + i];
        }
    }
    for (auto& v : out.data()) v *= inv;
    return x.tape().record("mean_axis", std::move(out), {x}, [sp, inv](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gi = t.grad(t.input(self, 0));
        for (std::size_t o = 0; o < sp.outer; ++o) {
            for (std::size_t j = 0; j < sp.n; ++j) {
                for (std::size_t i = 0; i < sp.inner; ++i) gi[(o * sp.n + j) * sp.inner + i] += g[o * sp.inner + i] * inv;
            }
        }
    });
}

Var max(const Var& x, std::size_t axis) {
    const AxisSplit sp = split_axis(x.shape(), axis);
    if (sp.n == 0) throw std::invalid_argument("max: empty axis");
    Tensor out(drop_axis(x.shape(), axis));
    std::vector<std::size_t> arg(out.numel());
    const Tensor& xv = x.value();
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
            std::size_t best = o * sp.n * sp.inner + i;
            for (std::size_t j = 1; j < sp.n; ++j) {
                const std::size_t idx = (o * sp.n + j) * sp.inner + i;
                if (xv[idx] > xv[best]) best = idx;
            }
            out[o * sp.inner + i] = xv[best];
            arg[o * sp.inner + i] = best;
        }
    }
    return x.tape().record("max_axis", std::move(out), {x}, [arg = std::move(arg)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gi = t.grad(t.input(self, 0));
        for (std::size_t k = 0; k < arg.size(); ++k) gi[arg[k]] += g[k];
    });
}

Var dropout(const Var& x, double rate, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
    if (rng == nullptr || rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(x.numel());
    for (auto& m : mask) m = rng->bernoulli(1.0 - rate) ? keep_scale : 0.0;
    Tensor out = x.value();
    out.set_requires_grad(false);
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] *= mask[i];
    return x.tape().record("dropout", std::move(out), {x}, [mask = std::move(mask)](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gi = t.grad(t.input(self, 0));
        for (std::size_t i = 0; i < mask.size(); ++i) gi[i] += g[i] * mask[i];
    });
}

Var softmax(const Var& x, std::size_t axis) {
    const Tensor& xv = x.value();
    if (!xv.all_finite()) throw NumericError("softmax: non-finite input");
    const AxisSplit sp = split_axis(x.shape(), axis);
    Tensor out(x.shape());
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
            const std::size_t base = o * sp.n * sp.inner + i;
            double mx = xv[base];
            for (std::size_t j = 1; j < sp.n; ++j) mx = std::max(mx, xv[base + j * sp.inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < sp.n; ++j) {
                const double e = std::exp(xv[base + j * sp.inner] - mx);
                out[base + j * sp.inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < sp.n; ++j) out[base + j * sp.inner] /= z;
        }
    }
    return x.tape().record("softmax", std::move(out), {x}, [sp](Tape& t, std::size_t self) {
        const Tensor& y = t.value(self);
        const Tensor& g = t.grad(self);
        Tensor& gi = t.grad(t.input(self, 0));
        for (std::size_t o = 0; o < sp.outer; ++o) {
            for (std::size_t i = 0; i < sp.inner; ++i) {
                const std::size_t base = o * sp.n * sp.inner + i;
                double dot = 0.0;
                for (std::size_t j = 0; j < sp.n; ++j) dot += g[base + j * sp.inner] * y[base + j * sp.inner];
                for (std::size_t j = 0; j < sp.n; ++j) {
                    const std::size_t k = base + j * sp.inner;
                    gi[k] += y[k] * (g[k] - dot);
                }
            }
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Shape& xs = x.shape();
    if (xs.empty() || xs.back() == 0) throw std::invalid_argument("layer_norm: zero-length last axis");
    if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
    const std::size_t d = xs.back();
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
        throw std::invalid_argument("layer_norm: gamma/beta must have shape (" + std::to_string(d) + ")");
    }
    const std::size_t rows = x.numel() / d;
    const Tensor& xv = x.value();
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    Tensor out(xs);
    std::vector<double> xhat(x.numel());
    std::vector<double> rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv.data().data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(d);
        rstd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (row[j] - mu) * rstd[r];
            xhat[r * d + j] = h;
            out[r * d + j] = gv[j] * h + bv[j];
        }
    }
    return x.tape().record(
        "layer_norm", std::move(out), {x, gamma, beta},
        [d, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, std::size_t self) {
            const std::size_t ix = t.input(self, 0), ig = t.input(self, 1), ib = t.input(self, 2);
            const Tensor& g = t.grad(self);
            const Tensor& gv = t.value(ig);
            if (t.requires_grad(ig) || t.requires_grad(ib)) {
                Tensor* gg = t.requires_grad(ig) ? &t.grad(ig) : nullptr;
                Tensor* gb = t.requires_grad(ib) ? &t.grad(ib) : nullptr;
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < d; ++j) {
                        if (gg) (*gg)[j] += g[r * d + j] * xhat[r * d + j];
                        if (gb) (*gb)[j] += g[r * d + j];
                    }
                }
            }
            if (!t.requires_grad(ix)) return;
            Tensor& gx = t.grad(ix);
            const double inv_d = 1.0 / static_cast<double>(d);
            for (std::size_t r = 0; r < rows; ++r) {
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double dh = g[r * d + j] * gv[j];
                    m1 += dh;
                    m2 += dh * xhat[r * d + j];
                }
                m1 *= inv_d;
                m2 *= inv_d;
                for (std::size_t j = 0; j < d; ++j) {
                    const double dh = g[r * d + j] * gv[j];
                    gx[r * d + j] += rstd[r] * (dh - m1 - xhat[r * d + j] * m2);
                }
            }
        });
}

Var cross_entropy_masked(const Var& logits, const std::vector<int>& targets, int ignore_id) {
    const Shape& ls = logits.shape();
    if (ls.size() != 2 || ls[0] != targets.size()) {
        throw std::invalid_argument("cross_entropy_masked: logits " + shape_str(ls) + " vs " +
                                    std::to_string(targets.size()) + " targets");
    }
    const std::size_t rows = ls[0], v = ls[1];
    const Tensor& lv = logits.value();
    if (!lv.all_finite()) throw NumericError("cross_entropy_masked: non-finite input");
    std::vector<double> probs(lv.numel(), 0.0);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (targets[r] == ignore_id) continue;
        if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v) {
            throw std::out_of_range("cross_entropy_masked: target " + std::to_string(targets[r]) + " outside [0," +
                                    std::to_string(v) + ")");
        }
        const double* row = lv.data().data() + r * v;
        double mx = row[0];
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        total += lse - row[targets[r]];
        for (std::size_t j = 0; j < v; ++j) probs[r * v + j] = std::exp(row[j] - lse);
        ++count;
    }
    if (count == 0) throw NumericError("cross_entropy_masked: empty loss");
    const double inv = 1.0 / static_cast<double>(count);
    return logits.tape().record(
        "cross_entropy", Tensor::scalar(total * inv), {logits},
        [targets, ignore_id, v, inv, probs = std::move(probs)](Tape& t, std::size_t self) {
            const double g = t.grad(self)[0] * inv;
            Tensor& gi = t.grad(t.input(self, 0));
            for (std::size_t r = 0; r < targets.size(); ++r) {
                if (targets[r] == ignore_id) continue;
                for (std::size_t j = 0; j < v; ++j) gi[r * v + j] += g * probs[r * v + j];
                gi[r * v + static_cast<std::size_t>(targets[r])] -= g;
            }
        });
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
    if (logits.numel() != targets.numel() || logits.numel() == 0) {
        throw std::invalid_argument("bce_with_logits: logits/targets size mismatch");
    }
    const Tensor& z = logits.value();
    if (!z.all_finite()) throw NumericError("bce_with_logits: non-finite input");
    const std::size_t k = z.numel();
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double ti = targets[i];
        if (ti != 0.0 && ti != 1.0) throw std::invalid_argument("bce_with_logits: targets must be 0 or 1");
        total += std::max(z[i], 0.0) - z[i] * ti + std::log1p(std::exp(-std::abs(z[i])));
    }
    const double inv = 1.0 / static_cast<double>(k);
    return logits.tape().record("bce", Tensor::scalar(total * inv), {logits}, [targets, inv](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] * inv;
        const std::size_t in = t.input(self, 0);
        const Tensor& zv = t.value(in);
        Tensor& gi = t.grad(in);
        for (std::size_t i = 0; i < zv.numel(); ++i) {
            const double s = zv[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-zv[i])) : std::exp(zv[i]) / (1.0 + std::exp(zv[i]));
            gi[i] += g * (s - targets[i]);
        }
    });
}

} // namespace ag
} // namespace vidcap
