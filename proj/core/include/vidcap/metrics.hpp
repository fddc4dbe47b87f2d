#pragma once

#include "vidcap/textproc.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vidcap::metrics {

using text::Tokens;
using NGram = std::vector<std::string>;
using NGramCounts = std::map<NGram, std::size_t>;
/// One entry per evaluated item, each holding that item's reference captions.
using References = std::vector<std::vector<Tokens>>;

/// Counts of every n-gram of exactly length n.
NGramCounts ngram_counts(const Tokens& tokens, std::size_t n);

enum class RefLength {
    Closest,  ///< reference length closest to the hypothesis, ties to the shorter
    Shortest, ///< shortest reference length
};

std::size_t effective_ref_length(std::size_t hyp_len, const std::vector<Tokens>& refs, RefLength rule);

double bleu4_corpus(const std::vector<Tokens>& preds, const References& refs, RefLength rule = RefLength::Closest);

/// Sentence BLEU-4 with zero precisions replaced by `epsilon`. Orders for which the
/// hypothesis has no n-grams at all are left out of the geometric mean.
double sentence_bleu4(const Tokens& pred, const std::vector<Tokens>& refs, double epsilon = 1e-9,
                      RefLength rule = RefLength::Closest);

double rouge_l(const std::vector<Tokens>& preds, const References& refs, double beta = 1.2);
double rouge_l_item(const Tokens& pred, const std::vector<Tokens>& refs, double beta = 1.2);
std::size_t lcs_length(const Tokens& a, const Tokens& b);

struct CiderResult {
    double score = 0.0;
    std::vector<double> per_item;
};

CiderResult cider_d(const std::vector<Tokens>& preds, const References& refs, std::size_t n_max = 4,
                    double sigma = 6.0);

double self_bleu(const std::vector<Tokens>& preds, double epsilon = 1e-9);

struct DiversityStats {
    double novel_pct = 0.0;
    double unique_pct = 0.0;
    double vocab_usage_pct = 0.0;
    std::size_t unique_count = 0;
    std::size_t novel_count = 0;
    std::size_t distinct_words = 0;
};

/// Both sides are normalized before comparison.
DiversityStats diversity_stats(const std::vector<std::string>& preds, const std::vector<std::string>& train_captions,
                               std::size_t train_vocab_size);

struct PosHistogram {
    std::vector<std::pair<std::string, std::size_t>> entries; ///< count desc, then pattern asc
    std::size_t distinct() const noexcept { return entries.size(); }
};

PosHistogram pos_structure_histogram(const std::vector<Tokens>& preds,
                                     const text::PosLexicon& lexicon = text::PosLexicon::builtin());

struct EvalReport {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double cider_d = 0.0;
    std::optional<double> self_bleu; ///< needs at least two predictions
    double novel_pct = 0.0;
    double unique_pct = 0.0;
    double vocab_usage_pct = 0.0;
    PosHistogram pos_histogram;
    std::size_t items = 0;
    std::size_t skipped = 0;
    std::vector<std::string> errors;

    bool partial() const noexcept { return skipped > 0; }
    /// Pretty-printed JSON; the POS table is included when `with_pos` is set.
    std::string to_json(bool with_pos = true) const;
};

/// Runs every metric on normalized predictions.
EvalReport evaluate_predictions(const std::vector<std::string>& preds, const References& refs,
                                const std::vector<std::string>& train_captions, std::size_t train_vocab_size);

} // namespace vidcap::metrics
