#include "vidcap/checkpoint.hpp"

#include "vidcap/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>

namespace vidcap {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json dims_json(const Dims3& d) { return ordered_json::array({d.t, d.h, d.w}); }

Dims3 dims_from(const json& j) {
    const auto v = j.get<std::vector<std::size_t>>();
    if (v.size() != 3) throw DataError("model config: expected 3 dims");
    return {v[0], v[1], v[2]};
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
}

} // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
    ordered_json e;
    e["patch"] = dims_json(cfg.encoder.patch);
    e["window"] = dims_json(cfg.encoder.window);
    e["depths"] = cfg.encoder.depths;
    e["heads"] = cfg.encoder.heads;
    e["embed_dim"] = cfg.encoder.embed_dim;
    e["token_dim"] = cfg.encoder.token_dim;
    e["rel_bias"] = cfg.encoder.rel_bias;
    e["concept_count"] = cfg.encoder.concept_count;
    e["in_channels"] = cfg.encoder.in_channels;
    e["mlp_ratio"] = cfg.encoder.mlp_ratio;
    e["head_hidden1"] = cfg.encoder.head_hidden1;
    e["head_hidden2"] = cfg.encoder.head_hidden2;
    e["ln_eps"] = cfg.encoder.ln_eps;
    ordered_json d;
    d["hidden"] = cfg.decoder.hidden;
    d["layers"] = cfg.decoder.layers;
    d["heads"] = cfg.decoder.heads;
    d["ffn"] = cfg.decoder.ffn;
    d["vocab"] = cfg.decoder.vocab;
    d["max_positions"] = cfg.decoder.max_positions;
    d["dropout"] = cfg.decoder.dropout;
    d["concept_count"] = cfg.decoder.concept_count;
    d["semantic_adapter"] = cfg.decoder.semantic_adapter;
    d["ln_eps"] = cfg.decoder.ln_eps;
    ordered_json j;
    j["encoder"] = e;
    j["decoder"] = d;
    j["afs_frames"] = cfg.afs_frames;
    j["afs_metric"] = std::string(afs::metric_name(cfg.afs_metric));
    j["afs_dedupe"] = cfg.afs_dedupe;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ModelConfig c;
        const json& e = j.at("encoder");
        c.encoder.patch = dims_from(e.at("patch"));
        c.encoder.window = dims_from(e.at("window"));
        c.encoder.depths = e.at("depths").get<std::vector<std::size_t>>();
        c.encoder.heads = e.at("heads").get<std::vector<std::size_t>>();
        c.encoder.embed_dim = e.at("embed_dim");
        c.encoder.token_dim = e.at("token_dim");
        c.encoder.rel_bias = e.at("rel_bias");
        c.encoder.concept_count = e.at("concept_count");
        c.encoder.in_channels = e.at("in_channels");
        c.encoder.mlp_ratio = e.at("mlp_ratio");
        c.encoder.head_hidden1 = e.at("head_hidden1");
        c.encoder.head_hidden2 = e.at("head_hidden2");
        c.encoder.ln_eps = e.at("ln_eps");
        const json& d = j.at("decoder");
        c.decoder.hidden = d.at("hidden");
        c.decoder.layers = d.at("layers");
        c.decoder.heads = d.at("heads");
        c.decoder.ffn = d.at("ffn");
        c.decoder.vocab = d.at("vocab");
        c.decoder.max_positions = d.at("max_positions");
        c.decoder.dropout = d.at("dropout");
        c.decoder.concept_count = d.at("concept_count");
        c.decoder.semantic_adapter = d.at("semantic_adapter");
        c.decoder.ln_eps = d.at("ln_eps");
        c.afs_frames = j.at("afs_frames");
        c.afs_metric = afs::parse_metric(j.at("afs_metric").get<std::string>());
        c.afs_dedupe = j.at("afs_dedupe");
        return c;
    } catch (const json::exception& ex) {
        throw DataError(std::string("model config: ") + ex.what());
    }
}

void save_checkpoint(const std::filesystem::path& dir, const CaptionModel& model, const text::Vocab& vocab,
                     const text::ConceptVocabulary& concepts, const std::vector<std::string>& train_captions,
                     const CheckpointMeta& meta) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

    ordered_json tensors = ordered_json::array();
    std::string blob;
    std::size_t offset = 0;
    for (const Parameter* p : model.params().all()) {
        const auto values = p->value.data();
        tensors.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}, {"count", values.size()}});
        for (double v : values) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
        }
        offset += values.size() * 4;
    }

    ordered_json m;
    m["format"] = "vidcap-checkpoint";
    m["version"] = 1;
    m["dtype"] = "f32le";
    m["step"] = meta.step;
    m["best_step"] = meta.best_step ? ordered_json(*meta.best_step) : ordered_json(nullptr);
    m["model"] = ordered_json::parse(model_config_to_json(model.config()));
    m["train_config"] = ordered_json::parse(meta.train_config_json);
    m["history"] = ordered_json::array();
    for (const auto& h : meta.history) {
        m["history"].push_back({{"step", h.step}, {"bleu4", h.bleu4}, {"cider_d", h.cider_d}});
    }
    m["tensors"] = std::move(tensors);
    m["total_bytes"] = offset;

    write_text(dir / "params.bin", blob);
    write_text(dir / "manifest.json", m.dump(1) + "\n");
    text::save_vocab_file(dir / "vocab.json", vocab, concepts);
    write_text(dir / "train_captions.json", ordered_json(train_captions).dump(1) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("checkpoint directory not found: " + dir.string());
    LoadedCheckpoint out;
    json m;
    try {
        m = json::parse(read_text(dir / "manifest.json"));
        if (m.at("format") != "vidcap-checkpoint" || m.at("version") != 1) throw DataError("unsupported checkpoint format");
        out.meta.step = m.at("step");
        if (!m.at("best_step").is_null()) out.meta.best_step = m.at("best_step").get<std::size_t>();
        out.meta.train_config_json = m.at("train_config").dump();
        for (const auto& h : m.at("history")) {
            out.meta.history.push_back({h.at("step"), h.at("bleu4"), h.at("cider_d")});
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint manifest: ") + e.what());
    }

    const ModelConfig cfg = model_config_from_json(m.at("model").dump());
    out.model = std::make_unique<CaptionModel>(cfg, 0);
    const std::string blob = read_text(dir / "params.bin");
    ParamStore& store = out.model->params();
    std::size_t seen = 0;
    try {
        for (const auto& t : m.at("tensors")) {
            const std::string name = t.at("name");
            if (!store.contains(name)) throw DataError("checkpoint: unknown tensor '" + name + "'");
            Parameter& p = store.get(name);
            if (t.at("shape").get<Shape>() != p.value.shape()) throw DataError("checkpoint: shape mismatch for '" + name + "'");
            const std::size_t offset = t.at("offset");
            const std::size_t count = t.at("count");
            if (count != p.value.numel() || offset + count * 4 > blob.size()) throw DataError("checkpoint: truncated params.bin");
            auto dst = p.value.data();
            for (std::size_t k = 0; k < count; ++k) {
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b) {
                    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + 4 * k + b])) << (8 * b);
                }
                dst[k] = static_cast<double>(std::bit_cast<float>(bits));
            }
            ++seen;
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint manifest: ") + e.what());
    }
    if (seen != store.size()) throw DataError("checkpoint: missing tensors");

    auto [vocab, concepts] = text::load_vocab_file(dir / "vocab.json");
    out.vocab = std::move(vocab);
    out.concepts = std::move(concepts);
    try {
        out.train_captions = json::parse(read_text(dir / "train_captions.json")).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint captions: ") + e.what());
    }
    return out;
}

} // namespace vidcap
