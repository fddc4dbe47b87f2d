#include "gradcheck_cases.hpp"

#include <cmath>

namespace oracle {

namespace ag = vidcap::ag;
using vidcap::Rng;
using vidcap::Shape;

namespace {

Tensor random(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    return vidcap::rand_uniform(shape, rng, lo, hi);
}

// Values bounded away from zero so that kinks stay outside the finite-difference stencil.
Tensor away_from_zero(const Shape& shape, std::uint64_t seed) {
    Tensor t = random(shape, seed, 0.1, 1.0);
    Rng signs(seed + 99);
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (signs.bernoulli(0.5)) t[i] = -t[i];
    }
    return t;
}

// Scalar projection with fixed random weights, so every output element matters.
Var project(Tape& tape, const Var& y, std::uint64_t seed) {
    return ag::sum(ag::mul(y, tape.constant(random(y.shape(), seed))));
}

} // namespace

std::vector<GradCase> gradcheck_cases() {
    std::vector<GradCase> c;
    c.push_back({"add", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::add(v[0], v[1]), 1); },
                 {random({3, 4}, 10), random({3, 4}, 11)}});
    c.push_back({"add_scalar_broadcast",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::add(v[0], v[1]), 2); },
                 {random({3, 4}, 12), random({}, 13)}});
    c.push_back({"sub", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::sub(v[0], v[1]), 3); },
                 {random({2, 5}, 14), random({2, 5}, 15)}});
    c.push_back({"mul", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::mul(v[0], v[1]), 4); },
                 {random({4, 3}, 16), random({4, 3}, 17)}});
    c.push_back({"scale", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::scale(v[0], -2.5), 5); },
                 {random({6}, 18)}});
    c.push_back({"relu", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::relu(v[0]), 6); },
                 {away_from_zero({3, 5}, 19)}});
    c.push_back({"gelu", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::gelu(v[0]), 7); },
                 {random({3, 5}, 20, -3.0, 3.0)}});
    c.push_back({"sigmoid", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::sigmoid(v[0]), 8); },
                 {random({3, 5}, 21, -4.0, 4.0)}});
    c.push_back({"matmul", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::matmul(v[0], v[1]), 9); },
                 {random({3, 4}, 22), random({4, 2}, 23)}});
    c.push_back({"matmul_shared_rhs",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::matmul(v[0], v[1]), 10); },
                 {random({2, 3, 4}, 24), random({4, 2}, 25)}});
    c.push_back({"matmul_batched",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::matmul(v[0], v[1]), 11); },
                 {random({2, 2, 3, 4}, 26), random({2, 2, 4, 3}, 27)}});
    c.push_back({"add_bias", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::add_bias(v[0], v[1]), 12); },
                 {random({4, 3}, 28), random({3}, 29)}});
    c.push_back({"linear",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::linear(v[0], v[1], v[2]), 13); },
                 {random({5, 3}, 30), random({3, 4}, 31), random({4}, 32)}});
    c.push_back({"embedding",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::embedding(v[0], {2, 0, 2, 1, 3}), 14); },
                 {random({4, 3}, 33)}});
    c.push_back({"concat_axis0",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::concat({v[0], v[1]}, 0), 15); },
                 {random({2, 3}, 34), random({1, 3}, 35)}});
    c.push_back({"concat_axis1",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::concat({v[0], v[1]}, 1), 16); },
                 {random({2, 3}, 36), random({2, 2}, 37)}});
    c.push_back({"reshape",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::reshape(v[0], {3, 2, 2}), 17); },
                 {random({4, 3}, 38)}});
    c.push_back({"permute",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::permute(v[0], {2, 0, 1}), 18); },
                 {random({2, 3, 4}, 39)}});
    c.push_back({"sum", [](Tape&, const std::vector<Var>& v) { return ag::sum(ag::mul(v[0], v[0])); },
                 {random({3, 3}, 40)}});
    c.push_back({"mean", [](Tape&, const std::vector<Var>& v) { return ag::mean(ag::mul(v[0], v[0])); },
                 {random({3, 3}, 41)}});
    c.push_back({"mean_axis", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::mean(v[0], 1), 19); },
                 {random({2, 4, 3}, 42)}});
    c.push_back({"max_axis", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::max(v[0], 0), 20); },
                 {random({5, 4}, 43)}});
    c.push_back({"dropout",
                 [](Tape& t, const std::vector<Var>& v) {
                     Rng rng(77);
                     return project(t, ag::dropout(v[0], 0.4, &rng), 21);
                 },
                 {random({4, 5}, 44)}});
    c.push_back({"softmax", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::softmax(v[0], 1), 22); },
                 {random({3, 5}, 45, -2.0, 2.0)}});
    c.push_back({"softmax_axis0", [](Tape& t, const std::vector<Var>& v) { return project(t, ag::softmax(v[0], 0), 23); },
                 {random({4, 2, 3}, 46, -2.0, 2.0)}});
    c.push_back({"layer_norm",
                 [](Tape& t, const std::vector<Var>& v) { return project(t, ag::layer_norm(v[0], v[1], v[2], 1e-5), 24); },
                 {random({3, 6}, 47), random({6}, 48, 0.5, 1.5), random({6}, 49)}});
    c.push_back({"cross_entropy_masked",
                 [](Tape&, const std::vector<Var>& v) { return ag::cross_entropy_masked(v[0], {1, 0, 4, 2}, 0); },
                 {random({4, 5}, 50, -2.0, 2.0)}});
    c.push_back({"bce_with_logits",
                 [](Tape&, const std::vector<Var>& v) {
                     return ag::bce_with_logits(v[0], Tensor({6}, std::vector<double>{1, 0, 0, 1, 1, 0}));
                 },
                 {random({6}, 51, -3.0, 3.0)}});

    // Compositions: a pre-norm MLP block, single-head attention, and a pooled classifier.
    c.push_back({"composition_mlp_block",
                 [](Tape& t, const std::vector<Var>& v) {
                     const Var h = ag::layer_norm(v[0], v[3], v[4], 1e-5);
                     const Var y = ag::gelu(ag::linear(h, v[1], v[2]));
                     return project(t, ag::add(ag::softmax(y, 1), ag::scale(y, 0.3)), 25);
                 },
                 {random({3, 4}, 52), random({4, 5}, 53), random({5}, 54), random({4}, 55, 0.5, 1.5),
                  random({4}, 56)}});
    c.push_back({"composition_attention",
                 [](Tape& t, const std::vector<Var>& v) {
                     const Var q = ag::matmul(v[0], v[1]);
                     const Var k = ag::matmul(v[0], v[2]);
                     const Var scores = ag::scale(ag::matmul(q, ag::permute(k, {1, 0})), 0.5);
                     const Var out = ag::matmul(ag::softmax(scores, 1), v[0]);
                     return project(t, ag::reshape(out, {out.numel()}), 26);
                 },
                 {random({4, 3}, 57), random({3, 3}, 58), random({3, 3}, 59)}});
    c.push_back({"composition_pooled_classifier",
                 [](Tape&, const std::vector<Var>& v) {
                     const Var tokens = ag::concat({ag::embedding(v[0], {1, 3, 0}), v[1]}, 0);
                     const Var pooled = ag::max(ag::sigmoid(tokens), 0);
                     const Var logits = ag::reshape(ag::matmul(ag::reshape(pooled, {1, 3}), v[2]), {4});
                     return ag::add(ag::bce_with_logits(logits, Tensor({4}, std::vector<double>{1, 0, 1, 0})),
                                    ag::mean(ag::mul(pooled, pooled)));
                 },
                 {random({4, 3}, 60), random({2, 3}, 61), random({3, 4}, 62)}});
    return c;
}

} // namespace oracle
