#pragma once

#include "vidcap/afs.hpp"
#include "vidcap/decoder.hpp"
#include "vidcap/decoding.hpp"
#include "vidcap/encoder.hpp"
#include "vidcap/params.hpp"
#include "vidcap/video.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vidcap {

struct ModelConfig {
    EncoderConfig encoder = EncoderConfig::desk();
    DecoderConfig decoder = DecoderConfig::desk();
    std::size_t afs_frames = 8; ///< N frames kept per video
    afs::Metric afs_metric = afs::Metric::Mad;
    bool afs_dedupe = false;

    /// Desk preset for a given vocabulary size and concept count.
    static ModelConfig desk(std::size_t vocab, std::size_t concepts);
    void validate() const;
};

/// Encoder, semantic concept head and caption decoder sharing one ParamStore.
class CaptionModel {
public:
    CaptionModel(const ModelConfig& cfg, std::uint64_t init_seed);
    CaptionModel(const CaptionModel&) = delete;
    CaptionModel& operator=(const CaptionModel&) = delete;

    const ModelConfig& config() const noexcept { return cfg_; }
    ParamStore& params() noexcept { return store_; }
    const ParamStore& params() const noexcept { return store_; }
    const VideoEncoder& encoder() const noexcept { return encoder_; }
    const ConceptHead& concept_head() const noexcept { return head_; }
    const CaptionDecoder& decoder() const noexcept { return decoder_; }

    /// AFS-selected frames of a full-length clip.
    VideoClip select_frames(const VideoClip& clip) const;

    struct Encoded {
        EncoderOutput tokens;
        Var concept_logits; ///< [K]
    };
    Encoded encode(Tape& tape, const VideoClip& selected, double head_dropout = 0.0, Rng* rng = nullptr) const;

    /// Teacher-forced logits [L+1, V] for `tokens` (without EOS); the semantic start
    /// vector is sigmoid(concept_logits).
    Var caption_logits(Tape& tape, const Encoded& enc, std::span<const int> tokens, Rng* rng = nullptr) const;

    std::vector<double> concept_probabilities(const VideoClip& selected) const;

    /// Next-token logits as a function of the generated prefix, for a fixed video.
    StepFn step_function(const VideoClip& selected) const;
    Hypothesis caption(const VideoClip& selected, const GenerationRequest& req) const;

private:
    ModelConfig cfg_;
    ParamStore store_;
    Rng init_rng_;
    VideoEncoder encoder_;
    ConceptHead head_;
    CaptionDecoder decoder_;
};

} // namespace vidcap
