#include "vidcap/model.hpp"

#include "vidcap/error.hpp"

namespace vidcap {

ModelConfig ModelConfig::desk(std::size_t vocab, std::size_t concepts) {
    ModelConfig c;
    c.encoder.concept_count = concepts;
    c.decoder.concept_count = concepts;
    c.decoder.vocab = vocab;
    c.decoder.semantic_adapter = concepts != c.decoder.hidden;
    return c;
}

void ModelConfig::validate() const {
    encoder.validate();
    decoder.validate();
    if (encoder.concept_count != decoder.concept_count) throw ConfigError("model: encoder and decoder disagree on K");
    if (encoder.token_dim != decoder.hidden) throw ConfigError("model: encoder token width must equal decoder width");
    if (afs_frames == 0) throw ConfigError("model: afs_frames must be >= 1");
    if (afs_frames % encoder.patch.t != 0) throw ConfigError("model: afs_frames must be a multiple of the temporal patch");
}

CaptionModel::CaptionModel(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_((cfg.validate(), cfg)),
      init_rng_(init_seed),
      encoder_(cfg_.encoder, store_, init_rng_),
      head_(cfg_.encoder.token_dim, cfg_.encoder.head_hidden1, cfg_.encoder.head_hidden2, cfg_.encoder.concept_count,
            store_, init_rng_),
      decoder_(cfg_.decoder, store_, init_rng_) {}

VideoClip CaptionModel::select_frames(const VideoClip& clip) const {
    const auto profile = afs::frame_dissimilarity(clip, cfg_.afs_metric);
    const auto cdf = afs::build_cdf(profile);
    return afs::apply_selection(clip, afs::select_frames(cdf, cfg_.afs_frames, cfg_.afs_dedupe));
}

CaptionModel::Encoded CaptionModel::encode(Tape& tape, const VideoClip& selected, double head_dropout, Rng* rng) const {
    Encoded e;
    e.tokens = encoder_.encode(tape, selected);
    e.concept_logits = head_.logits(tape, e.tokens, head_dropout, rng);
    return e;
}

Var CaptionModel::caption_logits(Tape& tape, const Encoded& enc, std::span<const int> tokens, Rng* rng) const {
    return decoder_.logits(tape, tokens, ag::sigmoid(enc.concept_logits), enc.tokens, rng);
}

std::vector<double> CaptionModel::concept_probabilities(const VideoClip& selected) const {
    Tape tape;
    const Var probs = ag::sigmoid(encode(tape, selected).concept_logits);
    const auto d = probs.value().data();
    return {d.begin(), d.end()};
}

StepFn CaptionModel::step_function(const VideoClip& selected) const {
    Tensor tokens;
    Tensor semantic;
    {
        Tape tape;
        const Encoded e = encode(tape, selected);
        tokens = e.tokens.tokens.value();
        semantic = ag::sigmoid(e.concept_logits).value();
    }
    return [this, tokens, semantic](const std::vector<int>& prefix) {
        Tape tape;
        const EncoderOutput enc{tape.constant(tokens)};
        const Var logits = decoder_.logits(tape, prefix, tape.constant(semantic), enc);
        const std::size_t v = logits.shape()[1];
        const auto d = logits.value().data();
        const std::size_t last = prefix.size() * v;
        return std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(last),
                                   d.begin() + static_cast<std::ptrdiff_t>(last + v));
    };
}

Hypothesis CaptionModel::caption(const VideoClip& selected, const GenerationRequest& req) const {
    if (req.max_length + 1 > cfg_.decoder.max_positions) {
        throw ConfigError("caption: max length " + std::to_string(req.max_length) + " exceeds decoder positions");
    }
    req.validate(cfg_.decoder.vocab);
    return generate(step_function(selected), req);
}

} // namespace vidcap
