#pragma once

#include "vidcap/autograd.hpp"
#include "vidcap/encoder.hpp"
#include "vidcap/params.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vidcap {

struct DecoderConfig {
    std::size_t hidden = 32; ///< D
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn = 128;
    std::size_t vocab = 0; ///< V, filled from the vocabulary
    std::size_t max_positions = 32;
    double dropout = 0.3;
    std::size_t concept_count = 16; ///< K
    /// Linear K -> D map for the semantic start token. Required when K != D.
    bool semantic_adapter = true;
    double ln_eps = 1e-12;

    static DecoderConfig desk();
    /// BERT-base sized reference values.
    static DecoderConfig reference();

    void validate() const;
};

/// Causal transformer decoder whose position 0 is the semantic concept vector
/// instead of a token embedding. Pre-norm blocks: self-attention, cross-attention
/// over the visual tokens, feed-forward.
class CaptionDecoder {
public:
    CaptionDecoder(const DecoderConfig& cfg, ParamStore& store, Rng& init_rng, const std::string& prefix = "decoder");

    const DecoderConfig& config() const noexcept { return cfg_; }

    /// [1 + tokens.size(), D]: position 0 = adapt(semantic) + pos[0], position i = emb(tokens[i-1]) + pos[i].
    Var embed_with_semantic_sos(Tape& tape, std::span<const int> tokens, const Var& semantic) const;

    /// Logits [L, V] for a hidden sequence produced by embed_with_semantic_sos.
    Var forward(Tape& tape, const Var& hidden, const EncoderOutput& encoder_tokens, Rng* dropout_rng = nullptr) const;

    Var logits(Tape& tape, std::span<const int> tokens, const Var& semantic, const EncoderOutput& encoder_tokens,
               Rng* dropout_rng = nullptr) const {
        return forward(tape, embed_with_semantic_sos(tape, tokens, semantic), encoder_tokens, dropout_rng);
    }

    Parameter& token_embedding() const { return *tok_embed_; }
    Parameter& position_embedding() const { return *pos_embed_; }
    const std::optional<LinearRef>& adapter() const noexcept { return adapter_; }

private:
    struct AttentionParams {
        LinearRef q, k, v, o;
    };
    struct Layer {
        LayerNormRef ln_self, ln_cross, ln_ffn;
        AttentionParams self_attn, cross_attn;
        LinearRef fc1, fc2;
    };

    Var attention(Tape& tape, const AttentionParams& p, const Var& query_in, const Var& kv_in, bool causal,
                  Rng* rng) const;

    DecoderConfig cfg_;
    Parameter* tok_embed_ = nullptr;
    Parameter* pos_embed_ = nullptr;
    std::optional<LinearRef> adapter_;
    std::vector<Layer> layers_;
    LayerNormRef final_norm_;
    LinearRef lm_head_;
};

} // namespace vidcap
