#pragma once

#include "vidcap/checkpoint.hpp"
#include "vidcap/decoding.hpp"
#include "vidcap/metrics.hpp"
#include "vidcap/model.hpp"
#include "vidcap/textproc.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vidcap {

enum class Phase { SemanticPretrain, EndToEnd };
Phase parse_phase(std::string_view s);
std::string_view phase_name(Phase p);

struct TrainConfig {
    std::string encoder_preset = "desk";
    std::string decoder_preset = "desk";
    std::size_t concepts = 16;          ///< K
    double lambda = 0.1;                ///< BCE weight in the joint loss
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::size_t batch_size = 8;
    std::size_t max_steps = 3000;       ///< total over both phases
    std::size_t semantic_steps = 500;   ///< steps of the first phase
    double grad_clip = 0.05;
    std::uint64_t seed = 0;
    std::vector<Phase> phases{Phase::SemanticPretrain, Phase::EndToEnd};
    double pretrain_head_dropout = 0.5;
    double head_dropout = 0.1;
    double decoder_dropout = 0.3;
    std::size_t afs_frames = 8;
    std::string afs_metric = "mad";
    bool afs_dedupe = false;
    std::size_t max_caption_length = 20;
    std::size_t min_word_freq = 1;
    std::size_t eval_every = 0;         ///< 0 disables periodic evaluation
    std::string eval_split = "val";

    void validate() const;
    /// Every field has a key; unknown keys are rejected.
    static TrainConfig from_json(std::string_view json);
    static TrainConfig load(const std::filesystem::path& path);
    std::string to_json() const;

    ModelConfig model_config(std::size_t vocab) const;
    std::size_t phase_steps(Phase p) const;
};

/// One video with its AFS-selected frames, encoded captions and concept labels.
struct Example {
    std::string id;
    VideoClip frames;
    std::vector<std::string> captions;
    std::vector<text::EncodedCaption> encoded;
    Tensor labels; ///< [K] in {0,1}
};

struct TrainingData {
    text::Vocab vocab;
    text::ConceptVocabulary concepts;
    std::vector<Example> train;
    std::vector<Example> eval;           ///< eval_split examples, possibly empty
    std::vector<std::string> train_captions;
};

/// Reads `dir`/corpus.jsonl, builds the vocabularies from its train split and
/// AFS-selects the frames of every train and eval video.
TrainingData load_training_data(const std::filesystem::path& dir, const TrainConfig& cfg);

struct BatchItem {
    std::size_t example = 0;
    std::size_t caption = 0;
};

struct BatchLoss {
    Var total;     ///< ce + lambda * bce (or bce alone in the first phase)
    double ce = 0.0;
    double bce = 0.0;
};

struct LossOptions {
    double lambda = 0.1;
    bool include_ce = true;
    double head_dropout = 0.0;
    Rng* dropout_rng = nullptr; ///< null disables every dropout
    /// Precomputed encoder tokens per example, used when the encoder is frozen.
    const std::vector<Tensor>* cached_tokens = nullptr;
};

/// Mean CE and BCE over the batch on one tape.
BatchLoss batch_loss(Tape& tape, const CaptionModel& model, const std::vector<Example>& data,
                     const std::vector<BatchItem>& batch, const LossOptions& opts);

struct StepLog {
    std::size_t step = 0;
    Phase phase = Phase::EndToEnd;
    double loss = 0.0;
    double ce = 0.0;
    double bce = 0.0;
    double grad_norm = 0.0;      ///< before clipping
    double clipped_norm = 0.0;   ///< after clipping
};

struct TrainResult {
    std::vector<StepLog> log;
    std::vector<HistoryEntry> history;
    std::optional<std::size_t> best_step;
    std::size_t steps = 0;
};

using StepCallback = std::function<void(const StepLog&)>;

/// Runs the configured phases on `model`, checking every loss for finiteness.
TrainResult train_model(CaptionModel& model, const TrainingData& data, const TrainConfig& cfg,
                        const StepCallback& on_step = {});

/// Eval-mode teacher-forced CE averaged over every (video, caption) pair.
double teacher_forced_ce(const CaptionModel& model, const std::vector<Example>& data);
/// Fraction of concept bits whose 0.5-thresholded probability equals the label.
double concept_bit_accuracy(const CaptionModel& model, const std::vector<Example>& data);

struct PredictionSet {
    std::vector<std::string> ids;
    std::vector<std::string> captions;
};

PredictionSet predict(const CaptionModel& model, const text::Vocab& vocab, const std::vector<Example>& data,
                      const GenerationRequest& req);

/// Harmonic mean of BLEU-4 and 10x CIDEr-D; ties keep the earliest step.
std::size_t select_best(const std::vector<HistoryEntry>& history);

struct EvaluationOutput {
    metrics::EvalReport report;
    PredictionSet predictions;
};

/// Captions every record of `corpus` with the checkpoint and scores the result.
/// Records whose video cannot be read are listed in report.errors and skipped.
EvaluationOutput evaluate_checkpoint(const LoadedCheckpoint& ckpt, const std::filesystem::path& corpus,
                                     const GenerationRequest& req);

/// {"id": ..., "caption": ...} per line.
void write_predictions(const std::filesystem::path& path, const PredictionSet& preds);
PredictionSet read_predictions(const std::filesystem::path& path);

} // namespace vidcap
