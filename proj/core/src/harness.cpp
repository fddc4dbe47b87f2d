#include "vidcap/harness.hpp"

#include "vidcap/afs.hpp"
#include "vidcap/error.hpp"
#include "vidcap/optim.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

namespace vidcap {

using nlohmann::json;
using nlohmann::ordered_json;

Phase parse_phase(std::string_view s) {
    if (s == "semantic_pretrain") return Phase::SemanticPretrain;
    if (s == "end_to_end") return Phase::EndToEnd;
    throw ConfigError("unknown phase '" + std::string(s) + "' (expected semantic_pretrain|end_to_end)");
}

std::string_view phase_name(Phase p) { return p == Phase::SemanticPretrain ? "semantic_pretrain" : "end_to_end"; }

void TrainConfig::validate() const {
    if (encoder_preset != "desk" && encoder_preset != "reference") throw ConfigError("train config: encoder must be desk|reference");
    if (decoder_preset != "desk" && decoder_preset != "reference") throw ConfigError("train config: decoder must be desk|reference");
    if (concepts < 1) throw ConfigError("train config: concepts must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("train config: lambda must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("train config: lr must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (!(grad_clip > 0.0)) throw ConfigError("train config: grad_clip must be > 0");
    if (phases.empty()) throw ConfigError("train config: no phases");
    if (phases.size() == 2 && (phases[0] != Phase::SemanticPretrain || phases[1] != Phase::EndToEnd)) {
        throw ConfigError("train config: phases must run semantic_pretrain before end_to_end");
    }
    if (phases.size() > 2 || (phases.size() == 2 && phases[0] == phases[1])) throw ConfigError("train config: repeated phase");
    if (semantic_steps > max_steps) throw ConfigError("train config: semantic_steps exceeds max_steps");
    for (double d : {pretrain_head_dropout, head_dropout, decoder_dropout}) {
        if (!(d >= 0.0 && d < 1.0)) throw ConfigError("train config: dropout rates must be in [0,1)");
    }
    if (afs_frames < 1) throw ConfigError("train config: afs_frames must be >= 1");
    afs::parse_metric(afs_metric);
    if (max_caption_length < 1) throw ConfigError("train config: max_caption_length must be >= 1");
    if (min_word_freq < 1) throw ConfigError("train config: min_word_freq must be >= 1");
    text::parse_split(eval_split);
}

TrainConfig TrainConfig::from_json(std::string_view text) {
    static const std::set<std::string> known{
        "encoder",      "decoder",         "concepts",         "lambda",          "lr",
        "weight_decay", "batch_size",      "max_steps",        "semantic_steps",  "grad_clip",
        "seed",         "phases",          "pretrain_head_dropout", "head_dropout", "decoder_dropout",
        "afs_frames",   "afs_metric",      "afs_dedupe",       "max_caption_length", "min_word_freq",
        "eval_every",   "eval_split"};
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("train config: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("train config: unknown key '" + key + "'");
    }
    TrainConfig c;
    try {
        c.encoder_preset = j.value("encoder", c.encoder_preset);
        c.decoder_preset = j.value("decoder", c.decoder_preset);
        c.concepts = j.value("concepts", c.concepts);
        c.lambda = j.value("lambda", c.lambda);
        c.lr = j.value("lr", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.max_steps = j.value("max_steps", c.max_steps);
        c.semantic_steps = j.value("semantic_steps", c.semantic_steps);
        c.grad_clip = j.value("grad_clip", c.grad_clip);
        c.seed = j.value("seed", c.seed);
        if (j.contains("phases")) {
            c.phases.clear();
            for (const auto& p : j["phases"]) c.phases.push_back(parse_phase(p.get<std::string>()));
        }
        c.pretrain_head_dropout = j.value("pretrain_head_dropout", c.pretrain_head_dropout);
        c.head_dropout = j.value("head_dropout", c.head_dropout);
        c.decoder_dropout = j.value("decoder_dropout", c.decoder_dropout);
        c.afs_frames = j.value("afs_frames", c.afs_frames);
        c.afs_metric = j.value("afs_metric", c.afs_metric);
        c.afs_dedupe = j.value("afs_dedupe", c.afs_dedupe);
        c.max_caption_length = j.value("max_caption_length", c.max_caption_length);
        c.min_word_freq = j.value("min_word_freq", c.min_word_freq);
        c.eval_every = j.value("eval_every", c.eval_every);
        c.eval_split = j.value("eval_split", c.eval_split);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::string TrainConfig::to_json() const {
    ordered_json j;
    j["encoder"] = encoder_preset;
    j["decoder"] = decoder_preset;
    j["concepts"] = concepts;
    j["lambda"] = lambda;
    j["lr"] = lr;
    j["weight_decay"] = weight_decay;
    j["batch_size"] = batch_size;
    j["max_steps"] = max_steps;
    j["semantic_steps"] = semantic_steps;
    j["grad_clip"] = grad_clip;
    j["seed"] = seed;
    j["phases"] = ordered_json::array();
    for (Phase p : phases) j["phases"].push_back(std::string(phase_name(p)));
    j["pretrain_head_dropout"] = pretrain_head_dropout;
    j["head_dropout"] = head_dropout;
    j["decoder_dropout"] = decoder_dropout;
    j["afs_frames"] = afs_frames;
    j["afs_metric"] = afs_metric;
    j["afs_dedupe"] = afs_dedupe;
    j["max_caption_length"] = max_caption_length;
    j["min_word_freq"] = min_word_freq;
    j["eval_every"] = eval_every;
    j["eval_split"] = eval_split;
    return j.dump(2);
}

ModelConfig TrainConfig::model_config(std::size_t vocab) const {
    ModelConfig m;
    m.encoder = encoder_preset == "reference" ? EncoderConfig::reference() : EncoderConfig::desk();
    m.decoder = decoder_preset == "reference" ? DecoderConfig::reference() : DecoderConfig::desk();
    m.encoder.concept_count = concepts;
    m.decoder.concept_count = concepts;
    m.decoder.vocab = vocab;
    m.decoder.dropout = decoder_dropout;
    m.decoder.semantic_adapter = concepts != m.decoder.hidden;
    m.afs_frames = afs_frames;
    m.afs_metric = afs::parse_metric(afs_metric);
    m.afs_dedupe = afs_dedupe;
    return m;
}

std::size_t TrainConfig::phase_steps(Phase p) const {
    if (phases.size() == 1) return phases[0] == p ? (p == Phase::SemanticPretrain ? semantic_steps : max_steps) : 0;
    return p == Phase::SemanticPretrain ? semantic_steps : max_steps - semantic_steps;
}

namespace {

VideoClip afs_frames_of(const VideoClip& clip, const TrainConfig& cfg) {
    const auto cdf = afs::build_cdf(afs::frame_dissimilarity(clip, afs::parse_metric(cfg.afs_metric)));
    return afs::apply_selection(clip, afs::select_frames(cdf, cfg.afs_frames, cfg.afs_dedupe));
}

Example make_example(const text::CaptionRecord& r, const std::filesystem::path& base, const TrainingData& d,
                     const TrainConfig& cfg) {
    Example ex;
    ex.id = r.id;
    ex.frames = afs_frames_of(read_vvid(base / r.video), cfg);
    ex.captions = r.captions;
    for (const auto& toks : r.tokens) ex.encoded.push_back(text::encode_caption(toks, d.vocab, cfg.max_caption_length));
    ex.labels = text::concept_label_vector(r, d.concepts).as_tensor();
    return ex;
}

} // namespace

TrainingData load_training_data(const std::filesystem::path& dir, const TrainConfig& cfg) {
    cfg.validate();
    const std::filesystem::path corpus_path = std::filesystem::is_directory(dir) ? dir / "corpus.jsonl" : dir;
    const auto records = text::read_corpus(corpus_path);
    const auto base = corpus_path.parent_path();
    TrainingData d;
    d.vocab = text::build_vocab(records, cfg.min_word_freq);
    d.concepts = text::build_concept_vocabulary(records, cfg.concepts);
    const text::Split eval_split = text::parse_split(cfg.eval_split);
    for (const auto& r : records) {
        if (r.split == text::Split::Train) {
            d.train.push_back(make_example(r, base, d, cfg));
            for (const auto& c : r.captions) d.train_captions.push_back(text::normalize(c));
        }
        if (r.split == eval_split) d.eval.push_back(make_example(r, base, d, cfg));
    }
    return d;
}

BatchLoss batch_loss(Tape& tape, const CaptionModel& model, const std::vector<Example>& data,
                     const std::vector<BatchItem>& batch, const LossOptions& opts) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    std::vector<Var> ces;
    std::vector<Var> bces;
    for (const BatchItem& item : batch) {
        const Example& ex = data.at(item.example);
        CaptionModel::Encoded enc;
        if (opts.cached_tokens) {
            enc.tokens = EncoderOutput{tape.constant(opts.cached_tokens->at(item.example))};
            enc.concept_logits = model.concept_head().logits(tape, enc.tokens, opts.head_dropout, opts.dropout_rng);
        } else {
            enc = model.encode(tape, ex.frames, opts.head_dropout, opts.dropout_rng);
        }
        bces.push_back(ag::bce_with_logits(enc.concept_logits, ex.labels));
        if (!opts.include_ce) continue;
        const text::EncodedCaption& cap = ex.encoded.at(item.caption);
        const std::size_t words = cap.length();
        const std::vector<int> inputs(cap.ids.begin(), cap.ids.begin() + static_cast<std::ptrdiff_t>(words));
        const std::vector<int> targets(cap.ids.begin(), cap.ids.begin() + static_cast<std::ptrdiff_t>(words + 1));
        const Var logits = model.caption_logits(tape, enc, inputs, opts.dropout_rng);
        ces.push_back(ag::cross_entropy_masked(logits, targets, text::Vocab::kPad));
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    const auto mean_of = [inv](const std::vector<Var>& terms) {
        Var acc = terms.front();
        for (std::size_t i = 1; i < terms.size(); ++i) acc = ag::add(acc, terms[i]);
        return ag::scale(acc, inv);
    };
    BatchLoss out;
    const Var bce = mean_of(bces);
    out.bce = bce.value().item();
    if (opts.include_ce) {
        const Var ce = mean_of(ces);
        out.ce = ce.value().item();
        out.total = ag::add(ce, ag::scale(bce, opts.lambda));
    } else {
        out.total = bce;
    }
    return out;
}

namespace {

class BatchSampler {
public:
    BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), order_rng_(seed + 1), caption_rng_(seed + 2) {}

    std::vector<BatchItem> next(std::size_t batch_size, const std::vector<Example>& data) {
        std::vector<BatchItem> out;
        for (std::size_t i = 0; i < batch_size; ++i) {
            if (pos_ == order_.size()) reshuffle();
            const std::size_t ex = order_[pos_++];
            out.push_back({ex, caption_rng_.index(data[ex].encoded.size())});
        }
        return out;
    }

private:
    void reshuffle() {
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
        for (std::size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[order_rng_.index(i)]);
        pos_ = 0;
    }

    std::size_t n_;
    Rng order_rng_;
    Rng caption_rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

std::vector<Parameter*> trainable(ParamStore& store) {
    std::vector<Parameter*> out;
    for (Parameter* p : store.all()) {
        if (p->trainable) out.push_back(p);
    }
    return out;
}

HistoryEntry evaluate_history(const CaptionModel& model, const TrainingData& data, std::size_t step) {
    const std::vector<Example>& set = data.eval.empty() ? data.train : data.eval;
    GenerationRequest req;
    req.eos_id = text::Vocab::kEos;
    const PredictionSet preds = predict(model, data.vocab, set, req);
    std::vector<metrics::Tokens> toks;
    metrics::References refs;
    for (std::size_t i = 0; i < set.size(); ++i) {
        toks.push_back(text::normalize_and_tokenize(preds.captions[i]));
        std::vector<metrics::Tokens> r;
        for (const auto& c : set[i].captions) r.push_back(text::normalize_and_tokenize(c));
        refs.push_back(std::move(r));
    }
    return {step, metrics::bleu4_corpus(toks, refs), metrics::cider_d(toks, refs).score};
}

} // namespace

TrainResult train_model(CaptionModel& model, const TrainingData& data, const TrainConfig& cfg, const StepCallback& on_step) {
    cfg.validate();
    if (data.train.empty()) throw DataError("train: empty training split");
    ParamStore& store = model.params();
    BatchSampler sampler(data.train.size(), cfg.seed);
    Rng dropout_rng(cfg.seed + 3);
    TrainResult result;
    std::vector<Tensor> best_values;
    double best_hm = -1.0;

    for (Phase phase : cfg.phases) {
        const std::size_t steps = cfg.phase_steps(phase);
        std::vector<Tensor> cache;
        if (phase == Phase::SemanticPretrain) {
            store.set_trainable("", false);
            store.set_trainable("concept_head", true);
            for (const Example& ex : data.train) {
                Tape tape;
                cache.push_back(model.encoder().encode(tape, ex.frames).tokens.value());
            }
        } else {
            store.set_trainable("", true);
        }
        std::vector<Parameter*> params = trainable(store);
        AdamWHyper hyper;
        hyper.lr = cfg.lr;
        hyper.weight_decay = cfg.weight_decay;
        AdamW opt(params, hyper);

        LossOptions opts;
        opts.lambda = cfg.lambda;
        opts.include_ce = phase == Phase::EndToEnd;
        opts.head_dropout = phase == Phase::SemanticPretrain ? cfg.pretrain_head_dropout : cfg.head_dropout;
        opts.dropout_rng = &dropout_rng;
        opts.cached_tokens = cache.empty() ? nullptr : &cache;

        for (std::size_t s = 0; s < steps; ++s) {
            const auto batch = sampler.next(cfg.batch_size, data.train);
            store.zero_grad();
            Tape tape;
            const BatchLoss loss = batch_loss(tape, model, data.train, batch, opts);
            const double total = loss.total.value().item();
            if (!std::isfinite(total)) {
                throw NumericError("train: non-finite loss at step " + std::to_string(result.steps + 1) +
                                   " (ce=" + std::to_string(loss.ce) + ", bce=" + std::to_string(loss.bce) + ")");
            }
            tape.accumulate_param_grads(tape.backward(loss.total));
            const ClipReport clip = clip_global_norm(std::span<Parameter* const>(params), cfg.grad_clip);
            if (!std::isfinite(clip.norm_before)) {
                throw NumericError("train: non-finite gradient norm at step " + std::to_string(result.steps + 1));
            }
            opt.step();
            ++result.steps;
            StepLog log{result.steps, phase, total, loss.ce, loss.bce, clip.norm_before, clip.norm_after};
            result.log.push_back(log);
            if (on_step) on_step(log);

            const bool last = s + 1 == steps;
            if (phase == Phase::EndToEnd && cfg.eval_every > 0 && (result.steps % cfg.eval_every == 0 || last)) {
                const HistoryEntry h = evaluate_history(model, data, result.steps);
                result.history.push_back(h);
                const double b = h.bleu4;
                const double c = 10.0 * h.cider_d;
                const double hm = b + c > 0.0 ? 2.0 * b * c / (b + c) : 0.0;
                if (hm > best_hm) {
                    best_hm = hm;
                    best_values.clear();
                    for (const Parameter* p : store.all()) best_values.push_back(p->value);
                }
            }
        }
    }
    store.set_trainable("", true);
    if (!result.history.empty()) {
        result.best_step = select_best(result.history);
        std::size_t i = 0;
        for (Parameter* p : store.all()) p->value = best_values[i++];
    }
    return result;
}

double teacher_forced_ce(const CaptionModel& model, const std::vector<Example>& data) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t e = 0; e < data.size(); ++e) {
        for (std::size_t c = 0; c < data[e].encoded.size(); ++c) {
            Tape tape;
            LossOptions opts;
            total += batch_loss(tape, model, data, {{e, c}}, opts).ce;
            ++pairs;
        }
    }
    if (pairs == 0) throw DataError("teacher_forced_ce: no captions");
    return total / static_cast<double>(pairs);
}

double concept_bit_accuracy(const CaptionModel& model, const std::vector<Example>& data) {
    std::size_t correct = 0;
    std::size_t total = 0;
    for (const Example& ex : data) {
        const auto probs = model.concept_probabilities(ex.frames);
        for (std::size_t k = 0; k < probs.size(); ++k) {
            correct += (probs[k] >= 0.5 ? 1.0 : 0.0) == ex.labels[k] ? 1 : 0;
            ++total;
        }
    }
    if (total == 0) throw DataError("concept_bit_accuracy: no examples");
    return static_cast<double>(correct) / static_cast<double>(total);
}

PredictionSet predict(const CaptionModel& model, const text::Vocab& vocab, const std::vector<Example>& data,
                      const GenerationRequest& req) {
    PredictionSet out;
    for (const Example& ex : data) {
        const Hypothesis h = model.caption(ex.frames, req);
        out.ids.push_back(ex.id);
        out.captions.push_back(text::detokenize(text::decode_ids(h.tokens, vocab)));
    }
    return out;
}

std::size_t select_best(const std::vector<HistoryEntry>& history) {
    if (history.empty()) throw std::invalid_argument("select_best: empty history");
    std::size_t best = 0;
    double best_hm = -1.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double a = history[i].bleu4;
        const double b = 10.0 * history[i].cider_d;
        const double hm = a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
        if (hm > best_hm || (hm == best_hm && history[i].step < history[best].step)) {
            best_hm = hm;
            best = i;
        }
    }
    return history[best].step;
}

EvaluationOutput evaluate_checkpoint(const LoadedCheckpoint& ckpt, const std::filesystem::path& corpus,
                                     const GenerationRequest& req) {
    const auto records = text::read_corpus(corpus);
    if (records.empty()) throw DataError("evaluate: empty corpus " + corpus.string());
    const auto base = corpus.parent_path();
    EvaluationOutput out;
    metrics::References refs;
    std::vector<std::string> errors;
    for (const auto& r : records) {
        VideoClip clip;
        try {
            clip = read_vvid(base / r.video);
        } catch (const DataError& e) {
            errors.push_back(r.id + ": " + e.what());
            continue;
        }
        const Hypothesis h = ckpt.model->caption(ckpt.model->select_frames(clip), req);
        out.predictions.ids.push_back(r.id);
        out.predictions.captions.push_back(text::detokenize(text::decode_ids(h.tokens, ckpt.vocab)));
        refs.push_back(r.tokens);
    }
    if (out.predictions.ids.empty()) throw DataError("evaluate: no readable videos in " + corpus.string());
    const std::size_t words = ckpt.vocab.size() - 4;
    out.report = metrics::evaluate_predictions(out.predictions.captions, refs, ckpt.train_captions, words);
    out.report.skipped = errors.size();
    out.report.errors = std::move(errors);
    return out;
}

void write_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write predictions " + path.string());
    for (std::size_t i = 0; i < preds.ids.size(); ++i) {
        ordered_json j;
        j["id"] = preds.ids[i];
        j["caption"] = preds.captions[i];
        os << j.dump() << '\n';
    }
}

PredictionSet read_predictions(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open predictions " + path.string());
    PredictionSet out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            out.ids.push_back(j.at("id").get<std::string>());
            out.captions.push_back(j.at("caption").get<std::string>());
        } catch (const json::exception& e) {
            throw DataError(std::string("predictions: ") + e.what());
        }
    }
    return out;
}

} // namespace vidcap
