#pragma once

#include "vidcap/model.hpp"
#include "vidcap/textproc.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vidcap {

struct HistoryEntry {
    std::size_t step = 0;
    double bleu4 = 0.0;
    double cider_d = 0.0;
    bool operator==(const HistoryEntry&) const = default;
};

struct CheckpointMeta {
    std::size_t step = 0;
    std::vector<HistoryEntry> history;
    std::optional<std::size_t> best_step;
    std::string train_config_json = "{}"; ///< echo of the training configuration
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json);

/// Writes manifest.json, params.bin (f32 LE, manifest order), vocab.json and
/// train_captions.json into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const CaptionModel& model, const text::Vocab& vocab,
                     const text::ConceptVocabulary& concepts, const std::vector<std::string>& train_captions,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    std::unique_ptr<CaptionModel> model;
    text::Vocab vocab;
    text::ConceptVocabulary concepts;
    std::vector<std::string> train_captions;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

} // namespace vidcap
