#include "vidcap/metrics.hpp"

#include "vidcap/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace vidcap::metrics {

namespace {

void check_pairs(const std::vector<Tokens>& preds, const References& refs, const char* what) {
    if (preds.empty()) throw DataError(std::string(what) + ": empty prediction set");
    if (preds.size() != refs.size()) throw std::invalid_argument(std::string(what) + ": preds/refs size mismatch");
    for (const auto& r : refs) {
        if (r.empty()) throw DataError(std::string(what) + ": item without references");
    }
}

// Per-n-gram maximum count over a set of references.
NGramCounts max_ref_counts(const std::vector<Tokens>& refs, std::size_t n) {
    NGramCounts out;
    for (const auto& r : refs) {
        for (const auto& [g, c] : ngram_counts(r, n)) {
            auto& slot = out[g];
            slot = std::max(slot, c);
        }
    }
    return out;
}

struct Matches {
    std::size_t clipped = 0;
    std::size_t total = 0;
};

Matches clipped_matches(const Tokens& pred, const std::vector<Tokens>& refs, std::size_t n) {
    Matches m;
    const NGramCounts ref_max = max_ref_counts(refs, n);
    for (const auto& [g, c] : ngram_counts(pred, n)) {
        m.total += c;
        auto it = ref_max.find(g);
        if (it != ref_max.end()) m.clipped += std::min(c, it->second);
    }
    return m;
}

} // namespace

NGramCounts ngram_counts(const Tokens& tokens, std::size_t n) {
    NGramCounts out;
    if (n == 0 || tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++out[NGram(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return out;
}

std::size_t effective_ref_length(std::size_t hyp_len, const std::vector<Tokens>& refs, RefLength rule) {
    if (refs.empty()) throw std::invalid_argument("effective_ref_length: no references");
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
        const std::size_t len = r.size();
        if (rule == RefLength::Shortest) {
            best = std::min(best, len);
            continue;
        }
        const auto diff = [&](std::size_t x) { return x > hyp_len ? x - hyp_len : hyp_len - x; };
        if (diff(len) < diff(best) || (diff(len) == diff(best) && len < best)) best = len;
    }
    return best;
}

double bleu4_corpus(const std::vector<Tokens>& preds, const References& refs, RefLength rule) {
    check_pairs(preds, refs, "bleu4");
    std::size_t clipped[4] = {0, 0, 0, 0};
    std::size_t totals[4] = {0, 0, 0, 0};
    std::size_t c = 0;
    std::size_t r = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        c += preds[i].size();
        r += effective_ref_length(preds[i].size(), refs[i], rule);
        for (std::size_t n = 1; n <= 4; ++n) {
            const Matches m = clipped_matches(preds[i], refs[i], n);
            clipped[n - 1] += m.clipped;
            totals[n - 1] += m.total;
        }
    }
    double log_sum = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
        if (totals[n] == 0 || clipped[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped[n]) / static_cast<double>(totals[n]));
    }
    const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
    return 100.0 * bp * std::exp(log_sum / 4.0);
}

double sentence_bleu4(const Tokens& pred, const std::vector<Tokens>& refs, double epsilon, RefLength rule) {
    if (refs.empty()) throw std::invalid_argument("sentence_bleu4: no references");
    const std::size_t c = pred.size();
    const std::size_t r = effective_ref_length(c, refs, rule);
    if (c == 0) return r == 0 ? 1.0 : 0.0;
    double log_sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const Matches m = clipped_matches(pred, refs, n);
        if (m.total == 0) continue;
        const double p = m.clipped == 0 ? epsilon : static_cast<double>(m.clipped) / static_cast<double>(m.total);
        log_sum += std::log(p);
        ++orders;
    }
    const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
    return bp * std::exp(log_sum / static_cast<double>(orders));
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l_item(const Tokens& pred, const std::vector<Tokens>& refs, double beta) {
    if (pred.empty()) return 0.0;
    double best = 0.0;
    for (const auto& ref : refs) {
        if (ref.empty()) continue;
        const auto lcs = static_cast<double>(lcs_length(pred, ref));
        const double p = lcs / static_cast<double>(pred.size());
        const double r = lcs / static_cast<double>(ref.size());
        if (p == 0.0 && r == 0.0) continue;
        const double b2 = beta * beta;
        best = std::max(best, (1.0 + b2) * p * r / (r + b2 * p));
    }
    return best;
}

double rouge_l(const std::vector<Tokens>& preds, const References& refs, double beta) {
    check_pairs(preds, refs, "rouge_l");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) total += rouge_l_item(preds[i], refs[i], beta);
    return 100.0 * total / static_cast<double>(preds.size());
}

namespace {

struct TfIdf {
    std::vector<std::map<NGram, double>> vec; // per n
    std::vector<double> norm;                 // per n
    std::size_t length = 0;
};

TfIdf tfidf(const Tokens& tokens, std::size_t n_max, const std::map<NGram, std::size_t>& df, double log_m) {
    TfIdf out;
    out.vec.resize(n_max);
    out.norm.assign(n_max, 0.0);
    out.length = tokens.size();
    for (std::size_t n = 1; n <= n_max; ++n) {
        for (const auto& [g, c] : ngram_counts(tokens, n)) {
            auto it = df.find(g);
            const double d = std::log(std::max(1.0, it == df.end() ? 0.0 : static_cast<double>(it->second)));
            const double v = static_cast<double>(c) * (log_m - d);
            out.vec[n - 1][g] = v;
            out.norm[n - 1] += v * v;
        }
    }
    for (double& x : out.norm) x = std::sqrt(x);
    return out;
}

} // namespace

CiderResult cider_d(const std::vector<Tokens>& preds, const References& refs, std::size_t n_max, double sigma) {
    check_pairs(preds, refs, "cider_d");
    if (n_max == 0) throw std::invalid_argument("cider_d: n_max must be >= 1");
    std::map<NGram, std::size_t> df;
    for (const auto& item_refs : refs) {
        std::set<NGram> seen;
        for (const auto& r : item_refs)
            for (std::size_t n = 1; n <= n_max; ++n)
                for (const auto& entry : ngram_counts(r, n)) seen.insert(entry.first);
        for (const auto& g : seen) ++df[g];
    }
    const double log_m = std::log(static_cast<double>(preds.size()));
    CiderResult result;
    result.per_item.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const TfIdf hyp = tfidf(preds[i], n_max, df, log_m);
        std::vector<double> score(n_max, 0.0);
        for (const auto& r : refs[i]) {
            const TfIdf ref = tfidf(r, n_max, df, log_m);
            const double delta = static_cast<double>(hyp.length) - static_cast<double>(ref.length);
            const double penalty = std::exp(-(delta * delta) / (2.0 * sigma * sigma));
            for (std::size_t n = 0; n < n_max; ++n) {
                double dot = 0.0;
                for (const auto& [g, hv] : hyp.vec[n]) {
                    auto it = ref.vec[n].find(g);
                    if (it != ref.vec[n].end()) dot += std::min(hv, it->second) * it->second;
                }
                if (hyp.norm[n] != 0.0 && ref.norm[n] != 0.0) dot /= hyp.norm[n] * ref.norm[n];
                score[n] += dot * penalty;
            }
        }
        double mean = 0.0;
        for (double s : score) mean += s;
        mean /= static_cast<double>(n_max);
        mean /= static_cast<double>(refs[i].size());
        result.per_item.push_back(10.0 * mean);
    }
    double total = 0.0;
    for (double s : result.per_item) total += s;
    result.score = total / static_cast<double>(preds.size());
    return result;
}

double self_bleu(const std::vector<Tokens>& preds, double epsilon) {
    if (preds.size() < 2) throw DataError("self_bleu: needs at least two predictions");
    double total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::vector<Tokens> others;
        others.reserve(preds.size() - 1);
        for (std::size_t j = 0; j < preds.size(); ++j) {
            if (j != i) others.push_back(preds[j]);
        }
        total += sentence_bleu4(preds[i], others, epsilon);
    }
    return 100.0 * total / static_cast<double>(preds.size());
}

DiversityStats diversity_stats(const std::vector<std::string>& preds, const std::vector<std::string>& train_captions,
                               std::size_t train_vocab_size) {
    if (train_vocab_size == 0) throw DataError("diversity_stats: training vocabulary size is zero");
    if (preds.empty()) throw DataError("diversity_stats: empty prediction set");
    std::set<std::string> train;
    for (const auto& c : train_captions) train.insert(text::normalize(c));
    std::set<std::string> distinct;
    std::set<std::string> words;
    DiversityStats s;
    for (const auto& p : preds) {
        const Tokens toks = text::normalize_and_tokenize(p);
        const std::string norm = text::detokenize(toks);
        if (!train.count(norm)) ++s.novel_count;
        distinct.insert(norm);
        words.insert(toks.begin(), toks.end());
    }
    const auto n = static_cast<double>(preds.size());
    s.unique_count = distinct.size();
    s.distinct_words = words.size();
    s.novel_pct = 100.0 * static_cast<double>(s.novel_count) / n;
    s.unique_pct = 100.0 * static_cast<double>(s.unique_count) / n;
    s.vocab_usage_pct =
        std::min(100.0, 100.0 * static_cast<double>(s.distinct_words) / static_cast<double>(train_vocab_size));
    return s;
}

PosHistogram pos_structure_histogram(const std::vector<Tokens>& preds, const text::PosLexicon& lexicon) {
    std::map<std::string, std::size_t> counts;
    for (const auto& p : preds) {
        std::string pattern;
        for (text::Pos tag : text::pos_tag(p, lexicon)) {
            if (!pattern.empty()) pattern.push_back('-');
            pattern += text::pos_name(tag);
        }
        ++counts[pattern];
    }
    PosHistogram h;
    h.entries.assign(counts.begin(), counts.end());
    std::stable_sort(h.entries.begin(), h.entries.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return h;
}

std::string EvalReport::to_json(bool with_pos) const {
    nlohmann::ordered_json j;
    j["bleu4"] = bleu4;
    j["rouge_l"] = rouge_l;
    j["cider_d"] = cider_d;
    j["self_bleu"] = self_bleu ? nlohmann::ordered_json(*self_bleu) : nlohmann::ordered_json(nullptr);
    j["novel_pct"] = novel_pct;
    j["unique_pct"] = unique_pct;
    j["vocab_usage_pct"] = vocab_usage_pct;
    j["items"] = items;
    j["skipped"] = skipped;
    j["partial"] = partial();
    j["errors"] = errors;
    j["distinct_pos_patterns"] = pos_histogram.distinct();
    if (with_pos) {
        auto table = nlohmann::ordered_json::array();
        for (const auto& [pattern, count] : pos_histogram.entries) {
            table.push_back({{"pattern", pattern}, {"count", count}});
        }
        j["pos_histogram"] = std::move(table);
    }
    return j.dump(2);
}

EvalReport evaluate_predictions(const std::vector<std::string>& preds, const References& refs,
                                const std::vector<std::string>& train_captions, std::size_t train_vocab_size) {
    std::vector<Tokens> toks;
    toks.reserve(preds.size());
    for (const auto& p : preds) toks.push_back(text::normalize_and_tokenize(p));
    EvalReport rep;
    rep.items = preds.size();
    rep.bleu4 = bleu4_corpus(toks, refs);
    rep.rouge_l = rouge_l(toks, refs);
    rep.cider_d = cider_d(toks, refs).score;
    if (toks.size() >= 2) rep.self_bleu = self_bleu(toks);
    const DiversityStats d = diversity_stats(preds, train_captions, train_vocab_size);
    rep.novel_pct = d.novel_pct;
    rep.unique_pct = d.unique_pct;
    rep.vocab_usage_pct = d.vocab_usage_pct;
    rep.pos_histogram = pos_structure_histogram(toks);
    return rep;
}

} // namespace vidcap::metrics
