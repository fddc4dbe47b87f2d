#include "vidcap/decoder.hpp"

#include "vidcap/error.hpp"

#include <cmath>
#include <numeric>

namespace vidcap {

DecoderConfig DecoderConfig::desk() { return DecoderConfig{}; }

DecoderConfig DecoderConfig::reference() {
    DecoderConfig c;
    c.hidden = 768;
    c.layers = 12;
    c.heads = 12;
    c.ffn = 3072;
    c.max_positions = 512;
    c.dropout = 0.3;
    c.concept_count = 768;
    c.semantic_adapter = false;
    return c;
}

void DecoderConfig::validate() const {
    if (hidden == 0 || heads == 0 || hidden % heads != 0) throw ConfigError("decoder: hidden width must be divisible by heads");
    if (layers == 0 || ffn == 0) throw ConfigError("decoder: layers and ffn width must be positive");
    if (vocab == 0) throw ConfigError("decoder: vocabulary size not set");
    if (max_positions < 2) throw ConfigError("decoder: max_positions must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("decoder: dropout must be in [0,1)");
    if (concept_count == 0) throw ConfigError("decoder: concept count must be positive");
    if (concept_count != hidden && !semantic_adapter) {
        throw ConfigError("decoder: concept count " + std::to_string(concept_count) + " != hidden width " +
                          std::to_string(hidden) + " and no semantic adapter configured");
    }
}

CaptionDecoder::CaptionDecoder(const DecoderConfig& cfg, ParamStore& store, Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d = cfg.hidden;
    tok_embed_ = &store.add(prefix + ".tok_embed", randn({cfg.vocab, d}, rng, 0.02));
    pos_embed_ = &store.add(prefix + ".pos_embed", randn({cfg.max_positions, d}, rng, 0.02));
    if (cfg.semantic_adapter) adapter_ = LinearRef::create(store, prefix + ".semantic_adapter", cfg.concept_count, d, rng);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = prefix + ".layer" + std::to_string(l);
        Layer layer;
        layer.ln_self = LayerNormRef::create(store, p + ".ln_self", d, cfg.ln_eps);
        layer.ln_cross = LayerNormRef::create(store, p + ".ln_cross", d, cfg.ln_eps);
        layer.ln_ffn = LayerNormRef::create(store, p + ".ln_ffn", d, cfg.ln_eps);
        for (auto [attn, name] : {std::pair{&layer.self_attn, ".self"}, std::pair{&layer.cross_attn, ".cross"}}) {
            attn->q = LinearRef::create(store, p + name + ".q", d, d, rng);
            attn->k = LinearRef::create(store, p + name + ".k", d, d, rng);
            attn->v = LinearRef::create(store, p + name + ".v", d, d, rng);
            attn->o = LinearRef::create(store, p + name + ".o", d, d, rng);
        }
        layer.fc1 = LinearRef::create(store, p + ".ffn.fc1", d, cfg.ffn, rng);
        layer.fc2 = LinearRef::create(store, p + ".ffn.fc2", cfg.ffn, d, rng);
        layers_.push_back(layer);
    }
    final_norm_ = LayerNormRef::create(store, prefix + ".final_norm", d, cfg.ln_eps);
    lm_head_ = LinearRef::create(store, prefix + ".lm_head", d, cfg.vocab, rng);
}

Var CaptionDecoder::embed_with_semantic_sos(Tape& tape, std::span<const int> tokens, const Var& semantic) const {
    const std::size_t len = tokens.size() + 1;
    if (len > cfg_.max_positions) {
        throw std::invalid_argument("decoder: sequence length " + std::to_string(len) + " exceeds max positions " +
                                    std::to_string(cfg_.max_positions));
    }
    if (semantic.numel() != cfg_.concept_count) {
        throw std::invalid_argument("decoder: semantic vector has " + std::to_string(semantic.numel()) +
                                    " entries, expected " + std::to_string(cfg_.concept_count));
    }
    Var start = ag::reshape(semantic, {1, cfg_.concept_count});
    if (adapter_) start = (*adapter_)(tape, start);

    std::vector<std::size_t> positions(len);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    const Var pos = ag::embedding(tape.param(*pos_embed_), positions);
    Var seq = start;
    if (!tokens.empty()) {
        std::vector<std::size_t> ids;
        ids.reserve(tokens.size());
        for (int t : tokens) {
            if (t < 0 || static_cast<std::size_t>(t) >= cfg_.vocab) throw std::out_of_range("decoder: token id out of range");
            ids.push_back(static_cast<std::size_t>(t));
        }
        seq = ag::concat({start, ag::embedding(tape.param(*tok_embed_), ids)}, 0);
    }
    return ag::add(seq, pos);
}

Var CaptionDecoder::attention(Tape& tape, const AttentionParams& p, const Var& query_in, const Var& kv_in, bool causal,
                              Rng* rng) const {
    const std::size_t lq = query_in.shape()[0];
    const std::size_t lk = kv_in.shape()[0];
    const std::size_t heads = cfg_.heads;
    const std::size_t hd = cfg_.hidden / heads;
    const Var q = ag::permute(ag::reshape(p.q(tape, query_in), {lq, heads, hd}), {1, 0, 2});
    const Var kt = ag::permute(ag::reshape(p.k(tape, kv_in), {lk, heads, hd}), {1, 2, 0});
    const Var v = ag::permute(ag::reshape(p.v(tape, kv_in), {lk, heads, hd}), {1, 0, 2});
    Var scores = ag::scale(ag::matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(hd)));
    if (causal && lq > 1) {
        Tensor mask({heads, lq, lk});
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < lq; ++i)
                for (std::size_t j = i + 1; j < lk; ++j) mask.at({h, i, j}) = kMaskedScore;
        scores = ag::add(scores, tape.constant(std::move(mask)));
    }
    const Var attn = ag::dropout(ag::softmax(scores, 2), cfg_.dropout, rng);
    const Var out = ag::reshape(ag::permute(ag::matmul(attn, v), {1, 0, 2}), {lq, cfg_.hidden});
    return p.o(tape, out);
}

Var CaptionDecoder::forward(Tape& tape, const Var& hidden, const EncoderOutput& enc, Rng* rng) const {
    if (enc.count() == 0) throw std::invalid_argument("decoder: empty encoder output");
    if (hidden.shape().size() != 2 || hidden.shape()[1] != cfg_.hidden) {
        throw std::invalid_argument("decoder: hidden sequence must be [L, D]");
    }
    if (hidden.shape()[0] > cfg_.max_positions) throw std::invalid_argument("decoder: sequence longer than max positions");
    const double rate = cfg_.dropout;
    Var x = ag::dropout(hidden, rate, rng);
    for (const Layer& layer : layers_) {
        const Var hs = layer.ln_self(tape, x);
        x = ag::add(x, ag::dropout(attention(tape, layer.self_attn, hs, hs, true, rng), rate, rng));
        const Var hc = layer.ln_cross(tape, x);
        x = ag::add(x, ag::dropout(attention(tape, layer.cross_attn, hc, enc.tokens, false, rng), rate, rng));
        const Var hf = layer.ln_ffn(tape, x);
        const Var ffn = layer.fc2(tape, ag::dropout(ag::gelu(layer.fc1(tape, hf)), rate, rng));
        x = ag::add(x, ag::dropout(ffn, rate, rng));
    }
    return lm_head_(tape, final_norm_(tape, x));
}

} // namespace vidcap
