#pragma once

#include "vidcap/autograd.hpp"
#include "vidcap/params.hpp"
#include "vidcap/video.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vidcap {

struct Dims3 {
    std::size_t t = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t count() const noexcept { return t * h * w; }
    bool operator==(const Dims3&) const = default;
};

struct EncoderConfig {
    Dims3 patch{2, 4, 4};
    Dims3 window{2, 2, 2};
    std::vector<std::size_t> depths{2, 2};
    std::vector<std::size_t> heads{2, 4};
    std::size_t embed_dim = 16;
    std::size_t token_dim = 32; ///< D, shared with the decoder
    bool rel_bias = true;
    std::size_t concept_count = 16; ///< K
    std::size_t in_channels = 3;
    std::size_t mlp_ratio = 4;
    std::size_t head_hidden1 = 32; ///< concept head per-token width
    std::size_t head_hidden2 = 64; ///< concept head post-pool width
    double ln_eps = 1e-12;

    /// Trainable on a CPU in minutes: 8 frames of 16x16.
    static EncoderConfig desk();
    /// Reference values (Swin-B, 32 frames of 224x224); constructible, not trainable here.
    static EncoderConfig reference();

    void validate() const;
    std::size_t stage_width(std::size_t stage) const { return embed_dim << stage; }
};

/// Tokens of a T' x H' x W' grid, row-major over (t, h, w), shape [T'H'W', C].
struct PatchGrid {
    Dims3 dims;
    std::size_t channels = 0;
    Var tokens;
    bool padded = false;
};

/// Visual tokens [T', D].
struct EncoderOutput {
    Var tokens;
    std::size_t count() const { return tokens.shape()[0]; }
};

struct WindowAttentionParams {
    std::size_t heads = 1;
    LinearRef q, k, v, proj;
    Parameter* rel_bias = nullptr; ///< [(2wt-1)(2wh-1)(2ww-1), heads]
};

struct SwinBlockParams {
    LayerNormRef norm1, norm2;
    WindowAttentionParams attn;
    LinearRef fc1, fc2;
};

struct PatchMergeParams {
    LayerNormRef norm;
    LinearRef reduction;
};

constexpr double kMaskedScore = -1e9;

Dims3 shift_for(const Dims3& window, bool shift);

/// For each row of the window-major layout (window, position-in-window), the
/// grid index of the token placed there after cyclically rolling the grid by `shift`.
std::vector<std::size_t> window_partition_index(const Dims3& dims, const Dims3& window, const Dims3& shift);

/// Per-window additive mask [num_windows, Nw, Nw]: 0 where attention is allowed,
/// kMaskedScore between tokens that came from different regions before the roll.
Tensor shifted_window_mask(const Dims3& dims, const Dims3& window, const Dims3& shift);

/// Relative-position-bias table row for each (i, j) pair inside a window, [Nw * Nw].
std::vector<std::size_t> relative_position_index(const Dims3& window);

/// Multi-head self-attention inside (optionally shifted) 3D windows. x is [N, C]
/// in grid order with dims divisible by the window; the result is in grid order.
Var window_self_attention(Tape& tape, const Var& x, const Dims3& dims, const Dims3& window, bool shift,
                          const WindowAttentionParams& params);

/// Grid indices (edge replication) that pad `dims` up to `padded`.
std::vector<std::size_t> pad_index(const Dims3& dims, const Dims3& padded);

class VideoEncoder {
public:
    VideoEncoder(const EncoderConfig& cfg, ParamStore& store, Rng& init_rng, const std::string& prefix = "encoder");

    const EncoderConfig& config() const noexcept { return cfg_; }

    PatchGrid patch_partition(Tape& tape, const VideoClip& clip) const;
    PatchGrid window_block(Tape& tape, const PatchGrid& grid, std::size_t stage, std::size_t index) const;
    PatchGrid patch_merge(Tape& tape, const PatchGrid& grid, std::size_t stage) const;
    EncoderOutput encode(Tape& tape, const VideoClip& clip) const;

    const SwinBlockParams& block_params(std::size_t stage, std::size_t index) const {
        return blocks_.at(stage).at(index);
    }
    const PatchMergeParams& merge_params(std::size_t stage) const { return merges_.at(stage); }
    const LinearRef& patch_projection() const noexcept { return patch_embed_; }

private:
    EncoderConfig cfg_;
    LinearRef patch_embed_;
    std::vector<std::vector<SwinBlockParams>> blocks_;
    std::vector<PatchMergeParams> merges_;
    LayerNormRef final_norm_;
    LinearRef out_proj_;
};

/// Pre-norm residual block: x + attn(LN(x)), then x + MLP(LN(x)).
Var swin_block(Tape& tape, const Var& x, const Dims3& dims, const Dims3& window, bool shift,
               const SwinBlockParams& params);

/// Semantic concept head: a shared per-token MLP, max-pooled over tokens,
/// then a two-layer MLP to K concept logits.
class ConceptHead {
public:
    ConceptHead(std::size_t token_dim, std::size_t hidden1, std::size_t hidden2, std::size_t concepts,
                ParamStore& store, Rng& init_rng, const std::string& prefix = "concept_head");

    Var logits(Tape& tape, const EncoderOutput& out, double dropout = 0.0, Rng* rng = nullptr) const;
    std::size_t concepts() const noexcept { return concepts_; }

    const LinearRef& shared() const noexcept { return shared_; }
    const LinearRef& hidden() const noexcept { return hidden_; }
    const LinearRef& output() const noexcept { return output_; }

private:
    std::size_t concepts_;
    LinearRef shared_;
    LinearRef hidden_;
    LinearRef output_;
};

/// Concept probabilities in (0,1), shape [K].
Var semantic_head(Tape& tape, const EncoderOutput& out, const ConceptHead& head);

} // namespace vidcap
