#include "vidcap/afs.hpp"
#include "vidcap/checkpoint.hpp"
#include "vidcap/error.hpp"
#include "vidcap/harness.hpp"
#include "vidcap/metrics.hpp"
#include "vidcap/synthetic.hpp"
#include "vidcap/textproc.hpp"
#include "vidcap/video.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw vidcap::DataError("cannot write " + path.string());
    os << text;
}

struct DecodeOptions {
    std::string strategy = "beam";
    std::size_t beam = 3;
    std::size_t top_k = 20;
    double top_p = 0.95;
    double temperature = 1.0;
    std::size_t max_len = 20;
    std::uint64_t seed = 0;
    double length_penalty = 0.0;

    void attach(CLI::App* app) {
        app->add_option("--decode", strategy, "beam|greedy|topk|topp")->capture_default_str();
        app->add_option("--beam", beam, "beam width")->capture_default_str();
        app->add_option("--top-k", top_k, "k for top-k sampling")->capture_default_str();
        app->add_option("--top-p", top_p, "mass for nucleus sampling")->capture_default_str();
        app->add_option("--temperature", temperature, "sampling temperature")->capture_default_str();
        app->add_option("--max-len", max_len, "maximum caption length in words")->capture_default_str();
        app->add_option("--seed", seed, "sampling seed")->capture_default_str();
        app->add_option("--length-penalty", length_penalty, "beam ranking exponent")->capture_default_str();
    }

    vidcap::GenerationRequest request() const {
        vidcap::GenerationRequest r;
        r.strategy = vidcap::parse_strategy(strategy);
        r.beam = beam;
        r.top_k = top_k;
        r.top_p = top_p;
        r.temperature = temperature;
        r.max_length = max_len;
        r.seed = seed;
        r.length_penalty = length_penalty;
        r.eos_id = vidcap::text::Vocab::kEos;
        return r;
    }
};

int cmd_gen_data(const fs::path& spec_path, const fs::path& out) {
    const auto spec = vidcap::synth::SyntheticSpec::load(spec_path);
    const auto records = vidcap::synth::generate_dataset(spec, out);
    std::printf("wrote %zu videos to %s\n", records.size(), out.string().c_str());
    return kExitOk;
}

int cmd_afs(const fs::path& video, std::size_t frames, const std::string& metric, bool dedupe, const fs::path& out) {
    const vidcap::VideoClip clip = vidcap::read_vvid(video);
    const auto profile = vidcap::afs::frame_dissimilarity(clip, vidcap::afs::parse_metric(metric));
    const auto cdf = vidcap::afs::build_cdf(profile);
    const auto sel = vidcap::afs::select_frames(cdf, frames, dedupe);
    ordered_json j;
    j["video"] = video.string();
    j["frames"] = clip.frames;
    j["n"] = frames;
    j["metric"] = metric;
    j["dedupe"] = dedupe;
    j["indices"] = sel.indices;
    j["quantiles"] = sel.quantiles;
    j["positions"] = sel.positions;
    j["dissimilarity"] = profile.d;
    j["uniform_indices"] = vidcap::afs::uniform_indices(clip.frames, frames);
    write_file(out, j.dump(2) + "\n");
    return kExitOk;
}

int cmd_build_vocab(const fs::path& corpus, std::size_t k, std::size_t min_freq, const fs::path& out) {
    const auto records = vidcap::text::read_corpus(corpus);
    const auto vocab = vidcap::text::build_vocab(records, min_freq);
    const auto concepts = vidcap::text::build_concept_vocabulary(records, k);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    vidcap::text::save_vocab_file(out, vocab, concepts);
    std::printf("vocab %zu tokens, %zu concepts\n", vocab.size(), concepts.size());
    return kExitOk;
}

int cmd_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& out, bool quiet) {
    const auto cfg = vidcap::TrainConfig::load(config_path);
    const auto data = vidcap::load_training_data(data_dir, cfg);
    vidcap::CaptionModel model(cfg.model_config(data.vocab.size()), cfg.seed);
    fs::create_directories(out);
    std::ofstream log(out / "train_log.jsonl", std::ios::trunc);
    if (!log) throw vidcap::DataError("cannot write training log in " + out.string());
    const auto start = std::chrono::steady_clock::now();
    const auto result = vidcap::train_model(model, data, cfg, [&](const vidcap::StepLog& s) {
        ordered_json j;
        j["step"] = s.step;
        j["phase"] = std::string(vidcap::phase_name(s.phase));
        j["loss"] = s.loss;
        j["ce"] = s.ce;
        j["bce"] = s.bce;
        j["grad_norm"] = s.grad_norm;
        j["clipped_norm"] = s.clipped_norm;
        log << j.dump() << '\n';
        if (!quiet && (s.step % 50 == 0 || s.step == 1)) {
            std::printf("step %5zu %-17s loss %.5f ce %.5f bce %.5f |g| %.4f\n", s.step,
                        std::string(vidcap::phase_name(s.phase)).c_str(), s.loss, s.ce, s.bce, s.grad_norm);
            std::fflush(stdout);
        }
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    vidcap::CheckpointMeta meta;
    meta.step = result.best_step.value_or(result.steps);
    meta.best_step = result.best_step;
    meta.history = result.history;
    meta.train_config_json = cfg.to_json();
    vidcap::save_checkpoint(out, model, data.vocab, data.concepts, data.train_captions, meta);
    std::printf("trained %zu steps in %.1fs; checkpoint at %s\n", result.steps, secs, out.string().c_str());
    return kExitOk;
}

int cmd_caption(const fs::path& ckpt_dir, const fs::path& video, const DecodeOptions& opts) {
    const auto ckpt = vidcap::load_checkpoint(ckpt_dir);
    const vidcap::VideoClip clip = vidcap::read_vvid(video);
    const auto h = ckpt.model->caption(ckpt.model->select_frames(clip), opts.request());
    std::printf("%s\n", vidcap::text::detokenize(vidcap::text::decode_ids(h.tokens, ckpt.vocab)).c_str());
    return kExitOk;
}

fs::path predictions_path(const fs::path& report) {
    fs::path p = report;
    p.replace_extension(".predictions.jsonl");
    return p;
}

int cmd_evaluate(const fs::path& ckpt_dir, const fs::path& corpus, const fs::path& out, const DecodeOptions& opts,
                 bool pos) {
    const auto ckpt = vidcap::load_checkpoint(ckpt_dir);
    const auto result = vidcap::evaluate_checkpoint(ckpt, corpus, opts.request());
    write_file(out, result.report.to_json(pos) + "\n");
    vidcap::write_predictions(predictions_path(out), result.predictions);
    std::printf("BLEU-4 %.2f  ROUGE-L %.2f  CIDEr-D %.3f  items %zu  skipped %zu\n", result.report.bleu4,
                result.report.rouge_l, result.report.cider_d, result.report.items, result.report.skipped);
    for (const auto& e : result.report.errors) std::fprintf(stderr, "skipped %s\n", e.c_str());
    return result.report.partial() ? kExitData : kExitOk;
}

int cmd_score(const fs::path& preds_path, const fs::path& refs_path, const fs::path& train_path, const fs::path& out,
              bool pos) {
    const auto preds = vidcap::read_predictions(preds_path);
    const auto refs = vidcap::text::read_corpus(refs_path);
    std::map<std::string, const vidcap::text::CaptionRecord*> by_id;
    for (const auto& r : refs) by_id[r.id] = &r;
    vidcap::metrics::References matched;
    for (const auto& id : preds.ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw vidcap::DataError("score: no references for id '" + id + "'");
        matched.push_back(it->second->tokens);
    }
    auto train = vidcap::text::read_corpus(train_path);
    for (auto& r : train) r.split = vidcap::text::Split::Train;
    const auto vocab = vidcap::text::build_vocab(train, 1);
    std::vector<std::string> train_captions;
    for (const auto& r : train)
        for (const auto& c : r.captions) train_captions.push_back(c);
    const auto report = vidcap::metrics::evaluate_predictions(preds.captions, matched, train_captions, vocab.size() - 4);
    write_file(out, report.to_json(pos) + "\n");
    std::printf("BLEU-4 %.2f  ROUGE-L %.2f  CIDEr-D %.3f\n", report.bleu4, report.rouge_l, report.cider_d);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Video captioning toolkit: synthetic data, adaptive frame selection, training, evaluation"};
    app.require_subcommand(1);

    std::string spec, out, video, metric = "mad", corpus, config, data, ckpt, preds, refs, train_corpus;
    std::size_t frames = 8, concepts = 16, min_freq = 1;
    bool dedupe = false, quiet = false, pos = false;
    DecodeOptions decode;

    auto* gen = app.add_subcommand("gen-data", "render a synthetic video/caption corpus");
    gen->add_option("--spec", spec, "dataset spec JSON")->required();
    gen->add_option("--out", out, "output directory")->required();

    auto* afs = app.add_subcommand("afs", "adaptive frame selection for one video");
    afs->add_option("--video", video, "VVID file")->required();
    afs->add_option("--frames", frames, "number of frames to keep")->required();
    afs->add_option("--metric", metric, "mad|patch")->capture_default_str();
    afs->add_flag("--dedupe", dedupe, "avoid repeated indices");
    afs->add_option("--out", out, "selection JSON")->required();

    auto* vocab = app.add_subcommand("build-vocab", "word and concept vocabularies from a corpus");
    vocab->add_option("--corpus", corpus, "corpus JSONL")->required();
    vocab->add_option("--concepts", concepts, "concept count K")->required();
    vocab->add_option("--min-freq", min_freq, "minimum word count")->capture_default_str();
    vocab->add_option("--out", out, "vocab JSON")->required();

    auto* train = app.add_subcommand("train", "train a captioning model");
    train->add_option("--config", config, "training config JSON")->required();
    train->add_option("--data", data, "dataset directory (corpus.jsonl)")->required();
    train->add_option("--out", out, "checkpoint directory")->required();
    train->add_flag("--quiet", quiet, "suppress progress lines");

    auto* caption = app.add_subcommand("caption", "caption one video");
    caption->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    caption->add_option("--video", video, "VVID file")->required();
    decode.attach(caption);

    auto* evaluate = app.add_subcommand("evaluate", "caption and score a corpus");
    evaluate->add_option("--ckpt", ckpt, "checkpoint directory")->required();
    evaluate->add_option("--corpus", corpus, "corpus JSONL")->required();
    evaluate->add_option("--out", out, "report JSON")->required();
    evaluate->add_flag("--pos-histogram", pos, "include the POS pattern table");
    decode.attach(evaluate);

    auto* score = app.add_subcommand("score", "score existing predictions");
    score->add_option("--preds", preds, "predictions JSONL")->required();
    score->add_option("--refs", refs, "reference corpus JSONL")->required();
    score->add_option("--train-corpus", train_corpus, "training corpus JSONL")->required();
    score->add_option("--out", out, "report JSON")->required();
    score->add_flag("--pos-histogram", pos, "include the POS pattern table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) return cmd_gen_data(spec, out);
        if (*afs) return cmd_afs(video, frames, metric, dedupe, out);
        if (*vocab) return cmd_build_vocab(corpus, concepts, min_freq, out);
        if (*train) return cmd_train(config, data, out, quiet);
        if (*caption) return cmd_caption(ckpt, video, decode);
        if (*evaluate) return cmd_evaluate(ckpt, corpus, out, decode, pos);
        if (*score) return cmd_score(preds, refs, train_corpus, out, pos);
    } catch (const vidcap::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const vidcap::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
