#pragma once

// Reference implementations used only by the tests. They are written directly
// from the mathematical definitions and share no code with the library.

#include "vidcap/autograd.hpp"
#include "vidcap/encoder.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

using vidcap::Tape;
using vidcap::Tensor;
using vidcap::Var;

struct GradcheckResult {
    double max_rel_err = 0.0;
    std::string worst; // "input i, element j"
};

using ScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Central differences with step h against reverse-mode gradients of every input.
/// Error is |a - n| / max(|a|, |n|, floor).
GradcheckResult gradcheck(const ScalarFn& fn, const std::vector<Tensor>& inputs, double h = 1e-5,
                          double floor = 1e-2);

/// Frame indices from the generalized inverse of the piecewise-linear CDF of an
/// integer-valued profile, located on a dense grid (>= min_points cells whose step
/// divides every breakpoint) and resolved with exact rational arithmetic.
std::vector<std::size_t> dense_grid_select(const std::vector<std::int64_t>& d, std::size_t n,
                                           std::size_t min_points = 100000);

/// Multi-head attention over the whole grid where token b is visible from token a iff
/// floor((c - s) / w) agrees on every axis; rel_bias indexed by in-window offsets.
Tensor global_masked_window_attention(const Tensor& x, const vidcap::Dims3& dims, const vidcap::Dims3& window,
                                      bool shift, const vidcap::WindowAttentionParams& params);

using Tokens = std::vector<std::string>;

/// CIDEr-D following the COCO toolkit: raw-count tf times ln(M / max(1, df)),
/// min-clipped dot product, Gaussian length penalty, mean over n and refs, x10.
double cider_d_bruteforce(const std::vector<Tokens>& preds, const std::vector<std::vector<Tokens>>& refs,
                          std::size_t n_max = 4, double sigma = 6.0);

/// Every token sequence of length <= max_len over [0, vocab) ending in EOS (or
/// reaching max_len); the one with the highest summed log-probability, ties to
/// the lexicographically smaller sequence.
std::vector<int> exhaustive_best(const std::function<std::vector<double>(const std::vector<int>&)>& step,
                                 std::size_t vocab, std::size_t max_len, int eos);

/// Gaussian logits seeded by (salt, prefix), so every prefix sees a fixed table.
std::function<std::vector<double>(const std::vector<int>&)> random_logit_table(std::size_t vocab, std::uint64_t salt);

} // namespace oracle
