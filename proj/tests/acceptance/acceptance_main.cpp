// Acceptance driver: one PASS/FAIL line per criterion, non-zero exit if any fails.
//
//   vidcap_acceptance --cli <path to vidcap> --workdir <scratch dir> [--only 1,2,7]

#include "gradcheck_cases.hpp"
#include "oracles.hpp"

#include "vidcap/afs.hpp"
#include "vidcap/decoder.hpp"
#include "vidcap/decoding.hpp"
#include "vidcap/encoder.hpp"
#include "vidcap/harness.hpp"
#include "vidcap/metrics.hpp"
#include "vidcap/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

using namespace vidcap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct Context {
    fs::path cli;
    fs::path workdir;
    fs::path configs;
};

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    Stopwatch sw;
    double worst = 0.0;
    std::string worst_name;
    std::size_t n = 0;
    for (const auto& c : oracle::gradcheck_cases()) {
        const auto r = oracle::gradcheck(c.fn, c.inputs, 1e-5);
        ++n;
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = c.name + " (" + r.worst + ")";
        }
    }
    const double secs = sw.seconds();
    return {worst < 1e-4 && secs < 120.0,
            fmt("%zu cases, max rel err %.3g at %s, %.2fs", n, worst, worst_name.c_str(), secs)};
}

Outcome afs_oracle() {
    std::mt19937_64 eng(20240601);
    std::size_t mismatches = 0;
    std::size_t scale_failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + eng() % 64;
        const std::size_t n = 1 + eng() % 32;
        std::vector<std::int64_t> d(m - 1);
        const int style = trial % 4;
        for (auto& v : d) {
            if (style == 0) v = static_cast<std::int64_t>(eng() % 1000);
            else if (style == 1) v = (eng() % 4 == 0) ? static_cast<std::int64_t>(eng() % 7) : 0;
            else if (style == 2) v = static_cast<std::int64_t>(1 + eng() % 3);
            else v = (eng() % 2) ? 0 : static_cast<std::int64_t>(eng() % 50);
        }
        afs::DissimilarityProfile p{m, std::vector<double>(d.begin(), d.end())};
        const auto sel = afs::select_frames(afs::build_cdf(p), n);
        if (sel.indices != oracle::dense_grid_select(d, n)) ++mismatches;

        const auto c = static_cast<double>(2 + eng() % 1000);
        afs::DissimilarityProfile scaled = p;
        for (double& v : scaled.d) v *= c;
        const auto sel2 = afs::select_frames(afs::build_cdf(scaled), n);
        if (sel2.indices != sel.indices || sel2.positions != sel.positions) ++scale_failures;
    }

    std::size_t uniform_failures = 0;
    for (std::size_t m = 1; m <= 64; ++m)
        for (std::size_t n = 1; n <= 32; ++n)
            for (double c : {0.0, 1.0, 0.37, 1e6}) {
                afs::DissimilarityProfile p{m, std::vector<double>(m - 1, c)};
                if (afs::select_frames(afs::build_cdf(p), n).indices != afs::uniform_indices(m, n)) ++uniform_failures;
            }
    return {mismatches == 0 && scale_failures == 0 && uniform_failures == 0,
            fmt("oracle mismatches %zu/1000, scale failures %zu/1000, constant-profile failures %zu/8192", mismatches,
                scale_failures, uniform_failures)};
}

Outcome afs_ablation() {
    const std::size_t frames = 40, n = 16;
    synth::SyntheticSpec spec;
    spec.videos = 1;
    spec.frames = frames;
    spec.static_prefix = 0.7;
    spec.noise = 0.0005;
    spec.motions = {synth::Motion::Left, synth::Motion::Right, synth::Motion::Up, synth::Motion::Down};
    const std::size_t prefix = synth::static_prefix_frames(spec);
    const std::size_t lo = prefix - 1; // last static frame; motion mass lives on x in [lo, M-1]
    const double fraction = static_cast<double>(frames - 1 - lo) / static_cast<double>(frames - 1);

    std::size_t uniform_in = 0;
    for (std::size_t i : afs::uniform_indices(frames, n)) uniform_in += i >= lo ? 1 : 0;

    std::size_t ok = 0, eligible = 0;
    double min_rho = 1.0, mean_afs = 0.0;
    for (std::uint64_t v = 0; v < 50; ++v) {
        spec.seed = 1000 + v;
        const auto facts = synth::assign_facts(spec)[0];
        const VideoClip clip = synth::render_video(spec, facts, 77 + v);
        const auto profile = afs::frame_dissimilarity(clip, afs::Metric::Mad);
        const double total = std::accumulate(profile.d.begin(), profile.d.end(), 0.0);
        const double moving = std::accumulate(profile.d.begin() + static_cast<std::ptrdiff_t>(lo), profile.d.end(), 0.0);
        const double rho = moving / total;
        min_rho = std::min(min_rho, rho);
        if (rho < 0.9) continue;
        ++eligible;
        std::size_t count = 0;
        for (std::size_t i : afs::select_frames(afs::build_cdf(profile), n).indices) count += i >= lo ? 1 : 0;
        mean_afs += static_cast<double>(count);
        const auto need = static_cast<std::size_t>(std::floor(static_cast<double>(n) * rho)) - 1;
        ok += count >= need ? 1 : 0;
    }
    mean_afs /= std::max<std::size_t>(1, eligible);
    const bool uniform_near = std::abs(static_cast<double>(uniform_in) - fraction * n) <= 1.0;
    return {eligible == 50 && ok == 50 && uniform_near,
            fmt("segment %.0f%% of timeline, min rho %.3f, %zu/50 videos meet floor(N rho)-1, mean AFS count %.1f/%zu, "
                "uniform count %zu (%.1f expected)",
                100.0 * fraction, min_rho, ok, mean_afs, n, uniform_in, fraction * n)};
}

Outcome window_attention_oracle() {
    const Dims3 window{2, 2, 2};
    Rng rng(4242);
    double worst = 0.0;
    std::size_t grids = 0;
    for (std::size_t t : {2, 4})
        for (std::size_t h : {2, 4, 6})
            for (std::size_t w : {2, 4, 6})
                for (std::size_t heads : {1, 2}) {
                    const Dims3 dims{t, h, w};
                    ParamStore store;
                    WindowAttentionParams p;
                    p.heads = heads;
                    p.q = LinearRef::create(store, "q", 8, 8, rng);
                    p.k = LinearRef::create(store, "k", 8, 8, rng);
                    p.v = LinearRef::create(store, "v", 8, 8, rng);
                    p.proj = LinearRef::create(store, "proj", 8, 8, rng);
                    p.rel_bias = &store.add("rel_bias", randn({27, heads}, rng, 0.5));
                    const Tensor x = randn({dims.count(), 8}, rng);
                    for (bool shift : {false, true}) {
                        Tape tape;
                        const Tensor got = window_self_attention(tape, tape.constant(x), dims, window, shift, p).value();
                        const Tensor want = oracle::global_masked_window_attention(x, dims, window, shift, p);
                        for (std::size_t i = 0; i < got.numel(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
                        ++grids;
                    }
                }
    return {worst < 1e-10, fmt("%zu grid/shift/head combinations up to (4,6,6), max |delta| %.3g", grids, worst)};
}

Outcome decoder_properties() {
    // Causality on a randomly initialised decoder.
    DecoderConfig cfg = DecoderConfig::desk();
    cfg.vocab = 11;
    cfg.concept_count = cfg.hidden;
    cfg.semantic_adapter = false;
    ParamStore store;
    Rng rng(8);
    CaptionDecoder dec(cfg, store, rng);
    Rng data(9);
    Tape tape;
    const Var semantic = tape.constant(randn({cfg.hidden}, data));
    const EncoderOutput enc{tape.constant(randn({4, cfg.hidden}, data))};
    const std::vector<int> base{4, 5, 6, 7, 8, 9, 10};
    const Tensor ref = dec.logits(tape, base, semantic, enc).value();
    std::size_t causal_violations = 0;
    for (std::size_t t = 0; t < base.size(); ++t) {
        std::vector<int> changed = base;
        changed[t] = 3;
        const Tensor out = dec.logits(tape, changed, semantic, enc).value();
        for (std::size_t i = 0; i < (t + 1) * cfg.vocab; ++i) causal_violations += out[i] != ref[i] ? 1 : 0;
    }

    std::size_t beam_mismatch = 0, beam_cases = 0;
    for (std::size_t vocab = 2; vocab <= 5; ++vocab)
        for (std::size_t len = 1; len <= 4; ++len)
            for (std::uint64_t salt = 0; salt < 5; ++salt) {
                const auto step = oracle::random_logit_table(vocab, 7919 * salt + 31 * vocab + len);
                for (int eos = 0; eos < 2; ++eos) {
                    GenerationRequest req;
                    req.eos_id = eos;
                    req.max_length = len;
                    req.beam = static_cast<std::size_t>(std::pow(vocab, len));
                    ++beam_cases;
                    if (generate_beam(step, req).best.tokens != oracle::exhaustive_best(step, vocab, len, eos)) {
                        ++beam_mismatch;
                    }
                }
            }

    std::size_t degenerate_mismatch = 0, degenerate_cases = 0;
    auto compare = [&](const StepFn& step, int eos, std::size_t max_len) {
        GenerationRequest req;
        req.eos_id = eos;
        req.max_length = max_len;
        req.beam = 1;
        const auto beam = generate(step, req);
        req.strategy = Strategy::Greedy;
        const auto greedy = generate(step, req);
        req.strategy = Strategy::TopK;
        req.top_k = 1;
        req.seed = 99;
        const auto topk = generate(step, req);
        ++degenerate_cases;
        if (!(beam.tokens == greedy.tokens && greedy.tokens == topk.tokens && beam.log_prob == greedy.log_prob &&
              greedy.log_prob == topk.log_prob)) {
            ++degenerate_mismatch;
        }
    };
    for (std::uint64_t salt = 0; salt < 200; ++salt) compare(oracle::random_logit_table(3 + salt % 9, salt), 2, 8);
    CaptionModel model(ModelConfig::desk(12, 16), 5);
    for (std::uint64_t v = 0; v < 5; ++v) {
        VideoClip clip(8, 16, 16, 3);
        Rng px(v);
        for (auto& p : clip.pixels) p = static_cast<float>(px.uniform());
        compare(model.step_function(clip), text::Vocab::kEos, 10);
    }

    return {causal_violations == 0 && beam_mismatch == 0 && degenerate_mismatch == 0,
            fmt("causal violations %zu; beam vs exhaustive mismatches %zu/%zu; beam1/greedy/topk1 mismatches %zu/%zu",
                causal_violations, beam_mismatch, beam_cases, degenerate_mismatch, degenerate_cases)};
}

Outcome metric_oracles() {
    using metrics::Tokens;
    std::mt19937_64 eng(777);
    auto sentences = [&](std::size_t count, std::size_t words, std::size_t max_len) {
        std::vector<Tokens> out;
        for (std::size_t i = 0; i < count; ++i) {
            Tokens t;
            const std::size_t len = 1 + eng() % max_len;
            for (std::size_t j = 0; j < len; ++j) t.push_back("w" + std::to_string(eng() % words));
            out.push_back(t);
        }
        return out;
    };

    std::vector<std::string> failures;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Tokens> preds;
        for (auto t : sentences(1 + eng() % 6, 8, 9)) {
            while (t.size() < 4) t.push_back("pad");
            preds.push_back(t);
        }
        metrics::References refs;
        for (const auto& p : preds) refs.push_back({p});
        if (metrics::bleu4_corpus(preds, refs) != 100.0) failures.push_back("bleu identity");
        if (metrics::rouge_l(preds, refs) != 100.0) failures.push_back("rouge identity");
    }
    {
        const std::vector<Tokens> same(4, Tokens{"a", "red", "square", "moves", "left"});
        if (metrics::self_bleu(same) != 100.0) failures.push_back("self-bleu identity");
        metrics::References refs(4, std::vector<Tokens>{same[0]});
        if (metrics::bleu4_corpus(same, refs) != 100.0) failures.push_back("bleu identity");
    }

    double cider_worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t items = 1 + eng() % 5;
        const auto preds = sentences(items, 6, 7);
        metrics::References refs;
        for (std::size_t i = 0; i < items; ++i) refs.push_back(sentences(1 + eng() % 4, 6, 7));
        cider_worst = std::max(cider_worst, std::abs(metrics::cider_d(preds, refs).score -
                                                     oracle::cider_d_bruteforce(preds, refs)));
    }
    if (!(cider_worst <= 1e-9)) failures.push_back("cider");

    std::size_t diversity_mismatch = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> preds, train;
        for (const auto& t : sentences(2 + eng() % 10, 3, 3)) preds.push_back(text::detokenize(t));
        for (const auto& t : sentences(eng() % 6, 3, 3)) train.push_back(text::detokenize(t));
        const std::size_t vocab = 1 + eng() % 12;
        // Exhaustive: compare every prediction against every other string.
        std::size_t novel = 0, unique = 0;
        std::vector<std::string> words;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            novel += std::none_of(train.begin(), train.end(), [&](const std::string& s) { return s == preds[i]; });
            unique += std::none_of(preds.begin(), preds.begin() + static_cast<std::ptrdiff_t>(i),
                                   [&](const std::string& s) { return s == preds[i]; });
            for (const auto& w : text::normalize_and_tokenize(preds[i])) {
                if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
            }
        }
        const double n = static_cast<double>(preds.size());
        const auto s = metrics::diversity_stats(preds, train, vocab);
        if (s.novel_pct != 100.0 * static_cast<double>(novel) / n ||
            s.unique_pct != 100.0 * static_cast<double>(unique) / n ||
            s.vocab_usage_pct != std::min(100.0, 100.0 * static_cast<double>(words.size()) / static_cast<double>(vocab))) {
            ++diversity_mismatch;
        }
    }
    if (diversity_mismatch) failures.push_back("diversity");

    std::string fail_list;
    for (const auto& f : failures) fail_list += (fail_list.empty() ? "" : ",") + f;
    return {failures.empty(), fmt("cider max |delta| %.3g over 100 corpora, diversity mismatches %zu/200%s%s",
                                  cider_worst, diversity_mismatch, failures.empty() ? "" : ", failed: ",
                                  fail_list.c_str())};
}

// ---------------------------------------------------------------------------
// Criteria 5, 8 and 9 share one overfit training run.

struct OverfitRun {
    bool ran = false;
    std::string error;
    TrainConfig cfg;
    double phase1_bits = -1.0;
    double permutation_delta = -1.0;
    double final_ce = -1.0;
    std::size_t exact = 0;
    std::size_t videos = 0;
    std::size_t steps = 0;
    double max_clipped = 0.0;
    double loss_worst = -1.0;
    double seconds = 0.0;
};

OverfitRun overfit(const Context& ctx) {
    OverfitRun r;
    try {
        const fs::path data_dir = ctx.workdir / "overfit_data";
        fs::remove_all(data_dir);
        synth::generate_dataset(synth::SyntheticSpec::load(ctx.configs / "overfit_data.json"), data_dir);
        r.cfg = TrainConfig::load(ctx.configs / "overfit_train.json");
        const TrainingData data = load_training_data(data_dir, r.cfg);
        r.videos = data.train.size();
        CaptionModel model(r.cfg.model_config(data.vocab.size()), r.cfg.seed);

        // Fixed-batch loss composition before any update.
        r.loss_worst = 0.0;
        for (std::size_t b = 0; b < 4; ++b) {
            std::vector<BatchItem> batch;
            for (std::size_t i = 0; i < r.cfg.batch_size; ++i) batch.push_back({(b * 5 + i * 3) % data.train.size(), 0});
            LossOptions opts;
            opts.lambda = r.cfg.lambda;
            Tape tape;
            const BatchLoss l = batch_loss(tape, model, data.train, batch, opts);
            r.loss_worst = std::max(r.loss_worst, std::abs(l.total.value().item() - (l.ce + 0.1 * l.bce)));
            LossOptions zero;
            zero.lambda = 0.0;
            Tape t0;
            const BatchLoss l0 = batch_loss(t0, model, data.train, batch, zero);
            r.loss_worst = std::max(r.loss_worst, std::abs(l0.total.value().item() - l0.ce));
        }

        const std::size_t phase1 = r.cfg.phase_steps(Phase::SemanticPretrain);
        Stopwatch sw;
        const TrainResult res = train_model(model, data, r.cfg, [&](const StepLog& s) {
            r.max_clipped = std::max(r.max_clipped, s.clipped_norm);
            if (s.phase == Phase::SemanticPretrain && s.step == phase1) {
                r.phase1_bits = concept_bit_accuracy(model, data.train);
            }
        });
        r.seconds = sw.seconds();
        r.steps = res.steps;

        // Permutation invariance of the concept head on the trained encoder's tokens.
        r.permutation_delta = 0.0;
        for (const Example& ex : data.train) {
            Tape tape;
            const auto enc = model.encode(tape, ex.frames);
            const Tensor base = semantic_head(tape, enc.tokens, model.concept_head()).value();
            std::vector<std::size_t> perm(enc.tokens.count());
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::reverse(perm.begin(), perm.end());
            const EncoderOutput shuffled{ag::embedding(enc.tokens.tokens, perm)};
            const Tensor out = semantic_head(tape, shuffled, model.concept_head()).value();
            for (std::size_t i = 0; i < out.numel(); ++i)
                r.permutation_delta = std::max(r.permutation_delta, std::abs(out[i] - base[i]));
        }

        r.final_ce = teacher_forced_ce(model, data.train);
        GenerationRequest req;
        req.beam = 3;
        const PredictionSet preds = predict(model, data.vocab, data.train, req);
        for (std::size_t i = 0; i < preds.captions.size(); ++i) {
            const auto& refs = data.train[i].captions;
            const bool hit = std::any_of(refs.begin(), refs.end(),
                                         [&](const std::string& c) { return text::normalize(c) == preds.captions[i]; });
            r.exact += hit ? 1 : 0;
        }
        r.ran = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    return r;
}

Outcome semantic_head_criterion(const OverfitRun& r) {
    if (!r.ran) return {false, "overfit run failed: " + r.error};
    return {r.permutation_delta == 0.0 && r.phase1_bits >= 0.95,
            fmt("permutation max |delta| %.3g; per-bit accuracy after %zu phase-1 steps %.2f%%", r.permutation_delta,
                r.cfg.phase_steps(Phase::SemanticPretrain), 100.0 * r.phase1_bits)};
}

Outcome overfit_criterion(const OverfitRun& r) {
    if (!r.ran) return {false, "overfit run failed: " + r.error};
    const double exact_frac = r.videos ? static_cast<double>(r.exact) / static_cast<double>(r.videos) : 0.0;
    const bool contract = r.videos == 16 && r.steps <= 3000 && r.cfg.lambda == 0.1 && r.cfg.grad_clip == 0.05;
    return {contract && r.final_ce < 0.1 && exact_frac >= 0.9 && r.seconds < 900.0,
            fmt("%zu videos, %zu steps, final teacher-forced CE %.4g, beam-3 exact %zu/%zu, wall %.1fs on 1 core",
                r.videos, r.steps, r.final_ce, r.exact, r.videos, r.seconds)};
}

Outcome loss_clip_criterion(const OverfitRun& r) {
    if (!r.ran) return {false, "overfit run failed: " + r.error};
    return {r.loss_worst <= 1e-12 && r.max_clipped <= 0.05 + 1e-12,
            fmt("loss composition max |delta| %.3g on 4 fixed batches; max post-clip norm %.17g over %zu steps",
                r.loss_worst, r.max_clipped, r.steps)};
}

// ---------------------------------------------------------------------------

int run(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome reproducibility(const Context& ctx) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int k = 0; k < 2; ++k) {
        const fs::path root = ctx.workdir / ("repro_" + std::to_string(k));
        fs::remove_all(root);
        fs::create_directories(root);
        const std::string cli = ctx.cli.string();
        const int g = run(cli + " gen-data --spec " + (ctx.configs / "overfit_data.json").string() + " --out " +
                          (root / "data").string());
        const int t = run(cli + " train --quiet --config " + (ctx.configs / "repro_train.json").string() + " --data " +
                          (root / "data").string() + " --out " + (root / "ckpt").string());
        const int e = run(cli + " evaluate --ckpt " + (root / "ckpt").string() + " --corpus " +
                          (root / "data" / "train.jsonl").string() + " --out " + (root / "report.json").string() +
                          " --pos-histogram");
        if (g || t || e) return {false, fmt("run %d exit codes gen-data %d, train %d, evaluate %d", k, g, t, e)};
        std::map<std::string, std::string> files;
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
        }
        runs.push_back(std::move(files));
    }
    std::size_t differing = 0;
    std::set<std::string> names;
    for (const auto& r : runs)
        for (const auto& kv : r) names.insert(kv.first);
    for (const auto& n : names) {
        auto a = runs[0].find(n), b = runs[1].find(n);
        if (a == runs[0].end() || b == runs[1].end() || a->second != b->second) ++differing;
    }
    const bool has_report = runs[0].count("report.json") && runs[0].count("ckpt/params.bin");
    return {differing == 0 && has_report,
            fmt("%zu files compared across two gen-data/train/evaluate runs, %zu differ", names.size(), differing)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    Context ctx;
    ctx.configs = VIDCAP_CONFIG_DIR;
    std::vector<int> only;
    app.add_option("--cli", ctx.cli, "vidcap executable")->required();
    app.add_option("--workdir", ctx.workdir, "scratch directory")->required();
    app.add_option("--configs", ctx.configs, "directory holding the overfit configs")->capture_default_str();
    app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(ctx.workdir);

    auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
    const char* names[] = {"",
                           "gradient suite",
                           "AFS dense-grid oracle",
                           "AFS ablation",
                           "window-attention oracle",
                           "semantic head",
                           "decoder properties",
                           "metric oracles",
                           "end-to-end overfit",
                           "loss and clip contracts",
                           "pipeline reproducibility"};

    std::map<int, Outcome> results;
    auto record = [&](int n, const std::function<Outcome()>& f) {
        if (!wanted(n)) return;
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        results[n] = o;
        std::printf("AC%-2d %-26s %s  %s\n", n, names[n], o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    };

    record(1, gradient_suite);
    record(2, afs_oracle);
    record(3, afs_ablation);
    record(4, window_attention_oracle);
    record(6, decoder_properties);
    record(7, metric_oracles);
    if (wanted(5) || wanted(8) || wanted(9)) {
        const OverfitRun r = overfit(ctx);
        record(5, [&] { return semantic_head_criterion(r); });
        record(8, [&] { return overfit_criterion(r); });
        record(9, [&] { return loss_clip_criterion(r); });
    }
    record(10, [&] { return reproducibility(ctx); });

    std::size_t passed = 0;
    for (const auto& [n, o] : results) passed += o.pass ? 1 : 0;
    std::printf("%zu/%zu criteria passed\n", passed, results.size());
    return passed == results.size() ? 0 : 1;
}
