#include "vidcap/decoding.hpp"

#include "vidcap/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vidcap {

Strategy parse_strategy(std::string_view name) {
    if (name == "beam") return Strategy::Beam;
    if (name == "greedy") return Strategy::Greedy;
    if (name == "topk") return Strategy::TopK;
    if (name == "topp") return Strategy::TopP;
    throw ConfigError("unknown decoding strategy '" + std::string(name) + "' (expected beam|greedy|topk|topp)");
}

std::string_view strategy_name(Strategy s) {
    switch (s) {
    case Strategy::Beam: return "beam";
    case Strategy::Greedy: return "greedy";
    case Strategy::TopK: return "topk";
    case Strategy::TopP: return "topp";
    }
    return "beam";
}

void GenerationRequest::validate(std::size_t vocab) const {
    if (beam < 1) throw ConfigError("generation: beam width must be >= 1");
    if (strategy == Strategy::TopK && (top_k < 1 || top_k > vocab)) throw ConfigError("generation: top-k must be in [1, V]");
    if (strategy == Strategy::TopP && !(top_p > 0.0 && top_p <= 1.0)) {
        throw ConfigError("generation: top-p must be in (0, 1]");
    }
    if (!(temperature > 0.0)) throw ConfigError("generation: temperature must be positive");
    if (max_length < 1) throw ConfigError("generation: max length must be >= 1");
    if (eos_id < 0 || static_cast<std::size_t>(eos_id) >= vocab) throw ConfigError("generation: EOS id outside vocabulary");
}

std::vector<int> Hypothesis::words(int eos_id) const {
    std::vector<int> out = tokens;
    if (!out.empty() && out.back() == eos_id) out.pop_back();
    return out;
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
    std::vector<double> out(logits.size());
    double mx = -INFINITY;
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("log_softmax: non-finite input");
        mx = std::max(mx, v / temperature);
    }
    double z = 0.0;
    for (double v : logits) z += std::exp(v / temperature - mx);
    const double lse = mx + std::log(z);
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / temperature - lse;
    return out;
}

int argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return static_cast<int>(best);
}

int sample_token(std::span<const double> logits, Strategy strategy, std::size_t top_k, double top_p,
                 double temperature, Rng& rng) {
    const std::vector<double> lp = log_softmax(logits, temperature);
    std::vector<std::size_t> order(lp.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lp[a] > lp[b]; });
    std::size_t keep = order.size();
    if (strategy == Strategy::TopK) {
        keep = std::min(top_k, order.size());
    } else if (strategy == Strategy::TopP) {
        double mass = 0.0;
        keep = 0;
        while (keep < order.size()) {
            mass += std::exp(lp[order[keep]]);
            ++keep;
            if (mass >= top_p) break;
        }
    } else if (strategy == Strategy::Greedy) {
        keep = 1;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < keep; ++i) total += std::exp(lp[order[i]]);
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        acc += std::exp(lp[order[i]]);
        if (u < acc) return static_cast<int>(order[i]);
    }
    return static_cast<int>(order[keep - 1]);
}

namespace {

double ranked_score(const Hypothesis& h, double penalty, int eos_id) {
    if (penalty == 0.0) return h.log_prob;
    const auto len = static_cast<double>(std::max<std::size_t>(1, h.words(eos_id).size()));
    return h.log_prob / std::pow(len, penalty);
}

// Higher score first; equal scores fall back to the lexicographically smaller sequence.
bool better(double sa, const std::vector<int>& ta, double sb, const std::vector<int>& tb) {
    if (sa != sb) return sa > sb;
    return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
}

} // namespace

BeamResult generate_beam(const StepFn& step, const GenerationRequest& req) {
    if (req.beam < 1) throw ConfigError("generation: beam width must be >= 1");
    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> pool;
    while (!live.empty()) {
        std::vector<Hypothesis> candidates;
        for (const Hypothesis& h : live) {
            const std::vector<double> logits = step(h.tokens);
            const std::vector<double> lp = log_softmax(logits);
            for (std::size_t tok = 0; tok < lp.size(); ++tok) {
                Hypothesis c;
                c.tokens = h.tokens;
                c.tokens.push_back(static_cast<int>(tok));
                c.log_prob = h.log_prob + lp[tok];
                candidates.push_back(std::move(c));
            }
        }
        const std::size_t keep = std::min(req.beam, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                          [](const Hypothesis& a, const Hypothesis& b) {
                              return better(a.log_prob, a.tokens, b.log_prob, b.tokens);
                          });
        std::vector<Hypothesis> next;
        for (std::size_t i = 0; i < keep; ++i) {
            Hypothesis& c = candidates[i];
            const bool eos = c.tokens.back() == req.eos_id;
            if (eos || c.tokens.size() >= req.max_length) {
                c.finished = true;
                pool.push_back(std::move(c));
            } else {
                next.push_back(std::move(c));
            }
        }
        live = std::move(next);
        // Scores only decrease as hypotheses grow, so a finished leader cannot be overtaken.
        if (req.length_penalty == 0.0 && !live.empty() && !pool.empty()) {
            const double best_done =
                std::max_element(pool.begin(), pool.end(), [](const Hypothesis& a, const Hypothesis& b) {
                    return a.log_prob < b.log_prob;
                })->log_prob;
            if (best_done > live.front().log_prob) break;
        }
    }
    if (pool.empty()) pool = live;
    std::stable_sort(pool.begin(), pool.end(), [&](const Hypothesis& a, const Hypothesis& b) {
        return better(ranked_score(a, req.length_penalty, req.eos_id), a.tokens,
                      ranked_score(b, req.length_penalty, req.eos_id), b.tokens);
    });
    return BeamResult{pool.front(), pool};
}

Hypothesis generate_sample(const StepFn& step, const GenerationRequest& req) {
    if (req.strategy == Strategy::Beam) throw ConfigError("generate_sample: beam strategy requested");
    Rng rng(req.seed);
    Hypothesis h;
    while (!h.finished) {
        const std::vector<double> logits = step(h.tokens);
        req.validate(logits.size());
        int tok = 0;
        double lp = 0.0;
        if (req.strategy == Strategy::Greedy) {
            const std::vector<double> logp = log_softmax(logits);
            tok = argmax(logp);
            lp = logp[static_cast<std::size_t>(tok)];
        } else {
            tok = sample_token(logits, req.strategy, req.top_k, req.top_p, req.temperature, rng);
            lp = log_softmax(logits, req.temperature)[static_cast<std::size_t>(tok)];
        }
        h.tokens.push_back(tok);
        h.log_prob += lp;
        h.finished = tok == req.eos_id || h.tokens.size() >= req.max_length;
    }
    return h;
}

Hypothesis generate(const StepFn& step, const GenerationRequest& req) {
    if (req.strategy == Strategy::Beam) return generate_beam(step, req).best;
    return generate_sample(step, req);
}

} // namespace vidcap
