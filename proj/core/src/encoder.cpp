#include "vidcap/encoder.hpp"

#include "vidcap/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace vidcap {

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::reference() {
    EncoderConfig c;
    c.patch = {2, 4, 4};
    c.window = {8, 7, 7};
    c.depths = {2, 2, 18, 2};
    c.heads = {4, 8, 16, 32};
    c.embed_dim = 128;
    c.token_dim = 768;
    c.concept_count = 768;
    c.head_hidden1 = 1024;
    c.head_hidden2 = 2048;
    return c;
}

void EncoderConfig::validate() const {
    if (patch.count() == 0 || window.count() == 0) throw ConfigError("encoder: patch and window dims must be >= 1");
    if (depths.empty() || depths.size() != heads.size()) throw ConfigError("encoder: depths and heads must have equal, non-zero length");
    for (std::size_t s = 0; s < depths.size(); ++s) {
        if (depths[s] < 1) throw ConfigError("encoder: every stage depth must be >= 1");
        if (heads[s] < 1 || stage_width(s) % heads[s] != 0) {
            throw ConfigError("encoder: stage " + std::to_string(s) + " width " + std::to_string(stage_width(s)) +
                              " not divisible by " + std::to_string(heads[s]) + " heads");
        }
    }
    if (embed_dim == 0 || token_dim == 0 || concept_count == 0 || in_channels == 0 || mlp_ratio == 0) {
        throw ConfigError("encoder: widths must be positive");
    }
    if (head_hidden1 == 0 || head_hidden2 == 0) throw ConfigError("encoder: concept head widths must be positive");
}

namespace {

std::size_t grid_index(const Dims3& d, std::size_t t, std::size_t h, std::size_t w) { return (t * d.h + h) * d.w + w; }

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

Dims3 round_up(const Dims3& d, const Dims3& m) {
    return {ceil_div(d.t, m.t) * m.t, ceil_div(d.h, m.h) * m.h, ceil_div(d.w, m.w) * m.w};
}

// Region of a rolled coordinate along one axis; tokens attend only within one region.
std::size_t region(std::size_t c, std::size_t dim, std::size_t win, std::size_t shift) {
    if (shift == 0) return 0;
    if (c < dim - win) return 0;
    if (c < dim - shift) return 1;
    return 2;
}

void check_window_fits(const Dims3& dims, const Dims3& window) {
    if (window.t > dims.t || window.h > dims.h || window.w > dims.w) {
        throw ConfigError("window (" + std::to_string(window.t) + "," + std::to_string(window.h) + "," +
                          std::to_string(window.w) + ") larger than grid (" + std::to_string(dims.t) + "," +
                          std::to_string(dims.h) + "," + std::to_string(dims.w) + ")");
    }
}

} // namespace

Dims3 shift_for(const Dims3& window, bool shift) {
    if (!shift) return {0, 0, 0};
    return {window.t / 2, window.h / 2, window.w / 2};
}

std::vector<std::size_t> window_partition_index(const Dims3& dims, const Dims3& window, const Dims3& shift) {
    if (dims.t % window.t || dims.h % window.h || dims.w % window.w) {
        throw std::invalid_argument("window_partition_index: grid not divisible by window");
    }
    const Dims3 nw{dims.t / window.t, dims.h / window.h, dims.w / window.w};
    std::vector<std::size_t> idx;
    idx.reserve(dims.count());
    for (std::size_t bt = 0; bt < nw.t; ++bt)
        for (std::size_t bh = 0; bh < nw.h; ++bh)
            for (std::size_t bw = 0; bw < nw.w; ++bw)
                for (std::size_t it = 0; it < window.t; ++it)
                    for (std::size_t ih = 0; ih < window.h; ++ih)
                        for (std::size_t iw = 0; iw < window.w; ++iw) {
                            const std::size_t t = (bt * window.t + it + shift.t) % dims.t;
                            const std::size_t h = (bh * window.h + ih + shift.h) % dims.h;
                            const std::size_t w = (bw * window.w + iw + shift.w) % dims.w;
                            idx.push_back(grid_index(dims, t, h, w));
                        }
    return idx;
}

Tensor shifted_window_mask(const Dims3& dims, const Dims3& window, const Dims3& shift) {
    const Dims3 nw{dims.t / window.t, dims.h / window.h, dims.w / window.w};
    const std::size_t per = window.count();
    Tensor mask({nw.count(), per, per});
    std::vector<std::array<std::size_t, 3>> labels(per);
    std::size_t b = 0;
    for (std::size_t bt = 0; bt < nw.t; ++bt)
        for (std::size_t bh = 0; bh < nw.h; ++bh)
            for (std::size_t bw = 0; bw < nw.w; ++bw, ++b) {
                std::size_t i = 0;
                for (std::size_t it = 0; it < window.t; ++it)
                    for (std::size_t ih = 0; ih < window.h; ++ih)
                        for (std::size_t iw = 0; iw < window.w; ++iw, ++i) {
                            labels[i] = {region(bt * window.t + it, dims.t, window.t, shift.t),
                                         region(bh * window.h + ih, dims.h, window.h, shift.h),
                                         region(bw * window.w + iw, dims.w, window.w, shift.w)};
                        }
                for (std::size_t i2 = 0; i2 < per; ++i2)
                    for (std::size_t j = 0; j < per; ++j)
                        mask.at({b, i2, j}) = labels[i2] == labels[j] ? 0.0 : kMaskedScore;
            }
    return mask;
}

std::vector<std::size_t> relative_position_index(const Dims3& window) {
    const std::size_t sh = 2 * window.h - 1;
    const std::size_t sw = 2 * window.w - 1;
    std::vector<std::array<std::size_t, 3>> coords;
    for (std::size_t t = 0; t < window.t; ++t)
        for (std::size_t h = 0; h < window.h; ++h)
            for (std::size_t w = 0; w < window.w; ++w) coords.push_back({t, h, w});
    std::vector<std::size_t> idx;
    idx.reserve(coords.size() * coords.size());
    for (const auto& a : coords) {
        for (const auto& b : coords) {
            const std::size_t dt = a[0] + window.t - 1 - b[0];
            const std::size_t dh = a[1] + window.h - 1 - b[1];
            const std::size_t dw = a[2] + window.w - 1 - b[2];
            idx.push_back((dt * sh + dh) * sw + dw);
        }
    }
    return idx;
}

std::vector<std::size_t> pad_index(const Dims3& dims, const Dims3& padded) {
    std::vector<std::size_t> idx;
    idx.reserve(padded.count());
    for (std::size_t t = 0; t < padded.t; ++t)
        for (std::size_t h = 0; h < padded.h; ++h)
            for (std::size_t w = 0; w < padded.w; ++w)
                idx.push_back(grid_index(dims, std::min(t, dims.t - 1), std::min(h, dims.h - 1), std::min(w, dims.w - 1)));
    return idx;
}

Var window_self_attention(Tape& tape, const Var& x, const Dims3& dims, const Dims3& window, bool shift,
                          const WindowAttentionParams& params) {
    check_window_fits(dims, window);
    const std::size_t n = dims.count();
    const std::size_t c = x.shape().at(1);
    if (x.shape()[0] != n) throw std::invalid_argument("window_self_attention: token count does not match grid");
    const std::size_t heads = params.heads;
    const std::size_t hd = c / heads;
    const Dims3 s = shift_for(window, shift);
    const std::vector<std::size_t> order = window_partition_index(dims, window, s);
    const std::size_t per = window.count();
    const std::size_t nw = n / per;

    const Var xw = ag::embedding(x, order);
    auto split_heads = [&](const Var& y) { return ag::permute(ag::reshape(y, {nw, per, heads, hd}), {0, 2, 1, 3}); };
    const Var q = split_heads(params.q(tape, xw));
    const Var kt = ag::permute(ag::reshape(params.k(tape, xw), {nw, per, heads, hd}), {0, 2, 3, 1});
    const Var v = split_heads(params.v(tape, xw));

    Var scores = ag::scale(ag::matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(hd)));
    if (params.rel_bias) {
        const std::vector<std::size_t> rel = relative_position_index(window);
        std::vector<std::size_t> ids;
        ids.reserve(nw * rel.size());
        for (std::size_t b = 0; b < nw; ++b) ids.insert(ids.end(), rel.begin(), rel.end());
        const Var bias = ag::embedding(tape.param(*params.rel_bias), ids);
        scores = ag::add(scores, ag::permute(ag::reshape(bias, {nw, per, per, heads}), {0, 3, 1, 2}));
    }
    if (shift) {
        const Tensor m = shifted_window_mask(dims, window, s);
        Tensor full({nw, heads, per, per});
        for (std::size_t b = 0; b < nw; ++b)
            for (std::size_t h = 0; h < heads; ++h)
                std::copy_n(m.data().begin() + static_cast<std::ptrdiff_t>(b * per * per), per * per,
                            full.data().begin() + static_cast<std::ptrdiff_t>((b * heads + h) * per * per));
        scores = ag::add(scores, tape.constant(std::move(full)));
    }
    const Var attn = ag::softmax(scores, 3);
    const Var merged = ag::reshape(ag::permute(ag::matmul(attn, v), {0, 2, 1, 3}), {n, c});
    const Var projected = params.proj(tape, merged);

    std::vector<std::size_t> inverse(n);
    for (std::size_t r = 0; r < n; ++r) inverse[order[r]] = r;
    return ag::embedding(projected, inverse);
}

Var swin_block(Tape& tape, const Var& x, const Dims3& dims, const Dims3& window, bool shift,
               const SwinBlockParams& params) {
    check_window_fits(dims, window);
    Var h = params.norm1(tape, x);
    const Dims3 padded = round_up(dims, window);
    Var attn;
    if (padded == dims) {
        attn = window_self_attention(tape, h, dims, window, shift, params.attn);
    } else {
        const Var hp = ag::embedding(h, pad_index(dims, padded));
        const Var ap = window_self_attention(tape, hp, padded, window, shift, params.attn);
        std::vector<std::size_t> crop;
        crop.reserve(dims.count());
        for (std::size_t t = 0; t < dims.t; ++t)
            for (std::size_t y = 0; y < dims.h; ++y)
                for (std::size_t w = 0; w < dims.w; ++w) crop.push_back(grid_index(padded, t, y, w));
        attn = ag::embedding(ap, crop);
    }
    Var out = ag::add(x, attn);
    const Var mlp = params.fc2(tape, ag::gelu(params.fc1(tape, params.norm2(tape, out))));
    return ag::add(out, mlp);
}

VideoEncoder::VideoEncoder(const EncoderConfig& cfg, ParamStore& store, Rng& rng, const std::string& prefix)
    : cfg_(cfg) {
    cfg_.validate();
    const std::size_t patch_in = cfg.patch.count() * cfg.in_channels;
    patch_embed_ = LinearRef::create(store, prefix + ".patch_embed", patch_in, cfg.embed_dim, rng);
    const std::size_t rel_rows = (2 * cfg.window.t - 1) * (2 * cfg.window.h - 1) * (2 * cfg.window.w - 1);
    for (std::size_t s = 0; s < cfg.depths.size(); ++s) {
        const std::size_t c = cfg.stage_width(s);
        std::vector<SwinBlockParams> stage;
        for (std::size_t b = 0; b < cfg.depths[s]; ++b) {
            const std::string p = prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(b);
            SwinBlockParams bp;
            bp.norm1 = LayerNormRef::create(store, p + ".norm1", c, cfg.ln_eps);
            bp.attn.heads = cfg.heads[s];
            bp.attn.q = LinearRef::create(store, p + ".attn.q", c, c, rng);
            bp.attn.k = LinearRef::create(store, p + ".attn.k", c, c, rng);
            bp.attn.v = LinearRef::create(store, p + ".attn.v", c, c, rng);
            bp.attn.proj = LinearRef::create(store, p + ".attn.proj", c, c, rng);
            if (cfg.rel_bias) {
                bp.attn.rel_bias = &store.add(p + ".attn.rel_bias", randn({rel_rows, cfg.heads[s]}, rng, 0.02));
            }
            bp.norm2 = LayerNormRef::create(store, p + ".norm2", c, cfg.ln_eps);
            bp.fc1 = LinearRef::create(store, p + ".mlp.fc1", c, c * cfg.mlp_ratio, rng);
            bp.fc2 = LinearRef::create(store, p + ".mlp.fc2", c * cfg.mlp_ratio, c, rng);
            stage.push_back(bp);
        }
        blocks_.push_back(std::move(stage));
        if (s + 1 < cfg.depths.size()) {
            const std::string p = prefix + ".merge" + std::to_string(s);
            PatchMergeParams mp;
            mp.norm = LayerNormRef::create(store, p + ".norm", 4 * c, cfg.ln_eps);
            mp.reduction = LinearRef::create(store, p + ".reduction", 4 * c, 2 * c, rng, false);
            merges_.push_back(mp);
        }
    }
    const std::size_t last = cfg.stage_width(cfg.depths.size() - 1);
    final_norm_ = LayerNormRef::create(store, prefix + ".final_norm", last, cfg.ln_eps);
    out_proj_ = LinearRef::create(store, prefix + ".out_proj", last, cfg.token_dim, rng);
}

PatchGrid VideoEncoder::patch_partition(Tape& tape, const VideoClip& clip) const {
    if (clip.frames == 0 || clip.height == 0 || clip.width == 0) throw DataError("patch_partition: empty clip");
    if (clip.channels != cfg_.in_channels) {
        throw DataError("patch_partition: clip has " + std::to_string(clip.channels) + " channels, encoder expects " +
                        std::to_string(cfg_.in_channels));
    }
    const Dims3& p = cfg_.patch;
    PatchGrid grid;
    grid.dims = {ceil_div(clip.frames, p.t), ceil_div(clip.height, p.h), ceil_div(clip.width, p.w)};
    grid.padded = clip.frames % p.t || clip.height % p.h || clip.width % p.w;
    grid.channels = cfg_.embed_dim;
    const std::size_t width = p.count() * clip.channels;
    Tensor patches({grid.dims.count(), width});
    std::size_t row = 0;
    for (std::size_t gt = 0; gt < grid.dims.t; ++gt)
        for (std::size_t gh = 0; gh < grid.dims.h; ++gh)
            for (std::size_t gw = 0; gw < grid.dims.w; ++gw, ++row) {
                std::size_t col = 0;
                for (std::size_t it = 0; it < p.t; ++it)
                    for (std::size_t ih = 0; ih < p.h; ++ih)
                        for (std::size_t iw = 0; iw < p.w; ++iw) {
                            const std::size_t t = std::min(gt * p.t + it, clip.frames - 1);
                            const std::size_t y = std::min(gh * p.h + ih, clip.height - 1);
                            const std::size_t x = std::min(gw * p.w + iw, clip.width - 1);
                            for (std::size_t ch = 0; ch < clip.channels; ++ch) {
                                patches[row * width + col++] = clip.at(t, y, x, ch);
                            }
                        }
            }
    grid.tokens = patch_embed_(tape, tape.constant(std::move(patches)));
    return grid;
}

PatchGrid VideoEncoder::window_block(Tape& tape, const PatchGrid& grid, std::size_t stage, std::size_t index) const {
    PatchGrid out = grid;
    out.tokens = swin_block(tape, grid.tokens, grid.dims, cfg_.window, index % 2 == 1, blocks_.at(stage).at(index));
    return out;
}

PatchGrid VideoEncoder::patch_merge(Tape& tape, const PatchGrid& grid, std::size_t stage) const {
    const PatchMergeParams& mp = merges_.at(stage);
    const Dims3 even{grid.dims.t, grid.dims.h + grid.dims.h % 2, grid.dims.w + grid.dims.w % 2};
    const Dims3 out_dims{even.t, even.h / 2, even.w / 2};
    const std::vector<std::size_t> pad = pad_index(grid.dims, even);
    std::vector<std::size_t> ids;
    ids.reserve(out_dims.count() * 4);
    for (std::size_t t = 0; t < out_dims.t; ++t)
        for (std::size_t h = 0; h < out_dims.h; ++h)
            for (std::size_t w = 0; w < out_dims.w; ++w) {
                ids.push_back(pad[grid_index(even, t, 2 * h, 2 * w)]);
                ids.push_back(pad[grid_index(even, t, 2 * h + 1, 2 * w)]);
                ids.push_back(pad[grid_index(even, t, 2 * h, 2 * w + 1)]);
                ids.push_back(pad[grid_index(even, t, 2 * h + 1, 2 * w + 1)]);
            }
    const Var grouped = ag::reshape(ag::embedding(grid.tokens, ids), {out_dims.count(), 4 * grid.channels});
    PatchGrid out;
    out.dims = out_dims;
    out.channels = 2 * grid.channels;
    out.padded = grid.padded || even != grid.dims;
    out.tokens = mp.reduction(tape, mp.norm(tape, grouped));
    return out;
}

EncoderOutput VideoEncoder::encode(Tape& tape, const VideoClip& clip) const {
    PatchGrid grid = patch_partition(tape, clip);
    for (std::size_t s = 0; s < cfg_.depths.size(); ++s) {
        for (std::size_t b = 0; b < cfg_.depths[s]; ++b) grid = window_block(tape, grid, s, b);
        if (s + 1 < cfg_.depths.size()) grid = patch_merge(tape, grid, s);
    }
    const Var normed = final_norm_(tape, grid.tokens);
    const Var per_time = ag::reshape(normed, {grid.dims.t, grid.dims.h * grid.dims.w, grid.channels});
    const Var pooled = ag::mean(per_time, 1);
    return EncoderOutput{out_proj_(tape, pooled)};
}

ConceptHead::ConceptHead(std::size_t token_dim, std::size_t hidden1, std::size_t hidden2, std::size_t concepts,
                         ParamStore& store, Rng& rng, const std::string& prefix)
    : concepts_(concepts) {
    shared_ = LinearRef::create(store, prefix + ".shared", token_dim, hidden1, rng);
    hidden_ = LinearRef::create(store, prefix + ".hidden", hidden1, hidden2, rng);
    output_ = LinearRef::create(store, prefix + ".output", hidden2, concepts, rng);
}

Var ConceptHead::logits(Tape& tape, const EncoderOutput& out, double dropout, Rng* rng) const {
    if (out.count() == 0) throw std::invalid_argument("semantic_head: no encoder tokens");
    const Var per_token = ag::dropout(ag::relu(shared_(tape, out.tokens)), dropout, rng);
    const Var pooled = ag::max(per_token, 0);
    const Var row = ag::reshape(pooled, {1, pooled.shape()[0]});
    const Var hidden = ag::dropout(ag::relu(hidden_(tape, row)), dropout, rng);
    return ag::reshape(output_(tape, hidden), {concepts_});
}

Var semantic_head(Tape& tape, const EncoderOutput& out, const ConceptHead& head) {
    return ag::sigmoid(head.logits(tape, out));
}

} // namespace vidcap
