#pragma once

#include "vidcap/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace vidcap {

enum class Strategy { Beam, Greedy, TopK, TopP };

Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy s);

struct GenerationRequest {
    Strategy strategy = Strategy::Beam;
    std::size_t beam = 3;
    std::size_t top_k = 20;
    double top_p = 0.95;
    double temperature = 1.0;
    /// Maximum number of non-EOS tokens; a hypothesis reaching it is finished.
    std::size_t max_length = 20;
    std::uint64_t seed = 0;
    /// Final beam ranking uses log_prob / length^penalty; 0 ranks by raw log-prob.
    double length_penalty = 0.0;
    int eos_id = 2;

    void validate(std::size_t vocab) const;
};

struct Hypothesis {
    std::vector<int> tokens; ///< includes the terminating EOS when one was emitted
    double log_prob = 0.0;
    bool finished = false;

    /// Tokens without a trailing EOS.
    std::vector<int> words(int eos_id) const;
    bool operator==(const Hypothesis&) const = default;
};

struct BeamResult {
    Hypothesis best;
    std::vector<Hypothesis> pool; ///< every retired hypothesis, best first
};

/// Next-token logits [V] given the generated prefix.
using StepFn = std::function<std::vector<double>(const std::vector<int>& prefix)>;

std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0);

/// Lowest index among the maxima.
int argmax(std::span<const double> values);

/// Draws one token from the top-k / top-p truncated softmax(logits / temperature).
int sample_token(std::span<const double> logits, Strategy strategy, std::size_t top_k, double top_p,
                 double temperature, Rng& rng);

/// Length-synchronous beam search over summed log-probabilities.
BeamResult generate_beam(const StepFn& step, const GenerationRequest& req);
/// Greedy, top-k or top-p decoding.
Hypothesis generate_sample(const StepFn& step, const GenerationRequest& req);
/// Dispatches on req.strategy.
Hypothesis generate(const StepFn& step, const GenerationRequest& req);

} // namespace vidcap
