#include "vidcap/synthetic.hpp"

#include "vidcap/error.hpp"
#include "vidcap/tensor.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace vidcap::synth {

using nlohmann::json;

ShapeKind parse_shape(std::string_view s) {
    if (s == "square") return ShapeKind::Square;
    if (s == "circle") return ShapeKind::Circle;
    if (s == "triangle") return ShapeKind::Triangle;
    throw ConfigError("unknown shape '" + std::string(s) + "'");
}

std::string_view shape_name(ShapeKind s) {
    switch (s) {
    case ShapeKind::Square: return "square";
    case ShapeKind::Circle: return "circle";
    case ShapeKind::Triangle: return "triangle";
    }
    return "square";
}

Motion parse_motion(std::string_view s) {
    if (s == "left") return Motion::Left;
    if (s == "right") return Motion::Right;
    if (s == "up") return Motion::Up;
    if (s == "down") return Motion::Down;
    if (s == "static") return Motion::Static;
    throw ConfigError("unknown motion '" + std::string(s) + "'");
}

std::string_view motion_name(Motion m) {
    switch (m) {
    case Motion::Left: return "left";
    case Motion::Right: return "right";
    case Motion::Up: return "up";
    case Motion::Down: return "down";
    case Motion::Static: return "static";
    }
    return "static";
}

namespace {

const std::map<std::string, std::vector<float>>& color_table() {
    static const std::map<std::string, std::vector<float>> table{
        {"red", {1.0f, 0.0f, 0.0f}},    {"green", {0.0f, 1.0f, 0.0f}},  {"blue", {0.0f, 0.0f, 1.0f}},
        {"yellow", {1.0f, 1.0f, 0.0f}}, {"white", {1.0f, 1.0f, 1.0f}},  {"orange", {1.0f, 0.5f, 0.0f}},
        {"purple", {0.5f, 0.0f, 1.0f}}, {"pink", {1.0f, 0.4f, 0.7f}},
    };
    return table;
}

template <class T>
std::vector<T> seeded_permutation(const std::vector<T>& items, Rng& rng) {
    std::vector<T> out = items;
    for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.index(i)]);
    return out;
}

} // namespace

std::vector<float> color_rgb(const std::string& color) {
    auto it = color_table().find(color);
    if (it == color_table().end()) throw ConfigError("unknown color '" + color + "'");
    return it->second;
}

void SyntheticSpec::validate() const {
    if (videos < 1 || frames < 2 || height < 4 || width < 4) {
        throw ConfigError("synthetic spec: need videos >= 1, frames >= 2, height and width >= 4");
    }
    if (shapes.empty() || colors.empty() || motions.empty()) throw ConfigError("synthetic spec: empty shape/color/motion set");
    for (const auto& c : colors) color_rgb(c);
    if (!(static_prefix >= 0.0 && static_prefix < 1.0)) throw ConfigError("synthetic spec: static_prefix must be in [0,1)");
    if (paraphrases < 1 || paraphrases > caption_templates(Motion::Left).size()) {
        throw ConfigError("synthetic spec: paraphrases must be in [1, " +
                          std::to_string(caption_templates(Motion::Left).size()) + "]");
    }
    if (noise < 0.0) throw ConfigError("synthetic spec: noise must be >= 0");
    if (val_videos + test_videos >= videos) throw ConfigError("synthetic spec: no videos left for training");
}

SyntheticSpec SyntheticSpec::from_json(std::string_view text) {
    static const std::set<std::string> known{"videos", "frames", "height", "width", "shapes", "colors", "motions",
                                             "static_prefix", "paraphrases", "noise", "val_videos", "test_videos",
                                             "seed"};
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("synthetic spec: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw ConfigError("synthetic spec: unknown key '" + key + "'");
    }
    SyntheticSpec s;
    try {
        s.videos = j.value("videos", s.videos);
        s.frames = j.value("frames", s.frames);
        s.height = j.value("height", s.height);
        s.width = j.value("width", s.width);
        if (j.contains("shapes")) {
            s.shapes.clear();
            for (const auto& v : j["shapes"]) s.shapes.push_back(parse_shape(v.get<std::string>()));
        }
        if (j.contains("colors")) s.colors = j["colors"].get<std::vector<std::string>>();
        if (j.contains("motions")) {
            s.motions.clear();
            for (const auto& v : j["motions"]) s.motions.push_back(parse_motion(v.get<std::string>()));
        }
        s.static_prefix = j.value("static_prefix", s.static_prefix);
        s.paraphrases = j.value("paraphrases", s.paraphrases);
        s.noise = j.value("noise", s.noise);
        s.val_videos = j.value("val_videos", s.val_videos);
        s.test_videos = j.value("test_videos", s.test_videos);
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open spec " + path.string());
    const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::string SyntheticSpec::to_json() const {
    nlohmann::ordered_json j;
    j["videos"] = videos;
    j["frames"] = frames;
    j["height"] = height;
    j["width"] = width;
    j["shapes"] = json::array();
    for (auto s : shapes) j["shapes"].push_back(std::string(shape_name(s)));
    j["colors"] = colors;
    j["motions"] = json::array();
    for (auto m : motions) j["motions"].push_back(std::string(motion_name(m)));
    j["static_prefix"] = static_prefix;
    j["paraphrases"] = paraphrases;
    j["noise"] = noise;
    j["val_videos"] = val_videos;
    j["test_videos"] = test_videos;
    j["seed"] = seed;
    return j.dump(2);
}

std::size_t static_prefix_frames(const SyntheticSpec& spec) {
    return static_cast<std::size_t>(std::floor(spec.static_prefix * static_cast<double>(spec.frames)));
}

std::vector<VideoFacts> assign_facts(const SyntheticSpec& spec) {
    std::vector<VideoFacts> combos;
    for (const auto& color : spec.colors)
        for (auto shape : spec.shapes)
            for (auto motion : spec.motions) combos.push_back({shape, color, motion});
    Rng rng(spec.seed);
    combos = seeded_permutation(combos, rng);
    std::vector<VideoFacts> out;
    out.reserve(spec.videos);
    for (std::size_t i = 0; i < spec.videos; ++i) out.push_back(combos[i % combos.size()]);
    return out;
}

namespace {

bool inside(ShapeKind shape, double dx, double dy, double s) {
    switch (shape) {
    case ShapeKind::Square: return std::abs(dx) <= s && std::abs(dy) <= s;
    case ShapeKind::Circle: return dx * dx + dy * dy <= s * s;
    case ShapeKind::Triangle: {
        if (dy < -s || dy > s) return false;
        return std::abs(dx) <= (dy + s) / 2.0;
    }
    }
    return false;
}

} // namespace

VideoClip render_video(const SyntheticSpec& spec, const VideoFacts& facts, std::uint64_t noise_seed) {
    VideoClip clip(spec.frames, spec.height, spec.width, 3, 0.0f);
    const std::vector<float> rgb = color_rgb(facts.color);
    const double s = std::max(1.5, static_cast<double>(std::min(spec.height, spec.width)) / 5.0);
    const double h = static_cast<double>(spec.height);
    const double w = static_cast<double>(spec.width);
    const double cx = (w - 1.0) / 2.0;
    const double cy = (h - 1.0) / 2.0;
    double x0 = cx, y0 = cy, x1 = cx, y1 = cy;
    switch (facts.motion) {
    case Motion::Left: x0 = w - 1.0 - s; x1 = s; break;
    case Motion::Right: x0 = s; x1 = w - 1.0 - s; break;
    case Motion::Up: y0 = h - 1.0 - s; y1 = s; break;
    case Motion::Down: y0 = s; y1 = h - 1.0 - s; break;
    case Motion::Static: break;
    }
    const std::size_t prefix = static_prefix_frames(spec);
    const std::size_t moving = spec.frames - prefix;
    for (std::size_t t = 0; t < spec.frames; ++t) {
        const double u = t < prefix ? 0.0 : static_cast<double>(t - prefix + 1) / static_cast<double>(moving);
        const double px = x0 + u * (x1 - x0);
        const double py = y0 + u * (y1 - y0);
        for (std::size_t y = 0; y < spec.height; ++y) {
            for (std::size_t x = 0; x < spec.width; ++x) {
                if (!inside(facts.shape, static_cast<double>(x) - px, static_cast<double>(y) - py, s)) continue;
                for (std::size_t c = 0; c < 3; ++c) clip.at(t, y, x, c) = rgb[c];
            }
        }
    }
    if (spec.noise > 0.0) {
        Rng rng(noise_seed);
        for (float& v : clip.pixels) {
            v = static_cast<float>(std::clamp(static_cast<double>(v) + rng.normal(0.0, spec.noise), 0.0, 1.0));
        }
    }
    return clip;
}

std::vector<std::string> caption_templates(Motion motion) {
    if (motion == Motion::Static) {
        return {"a {color} {shape} stays still", "{color} {shape} staying still", "a {shape} that is {color} stays still",
                "the {color} {shape} does not move"};
    }
    return {"a {color} {shape} moves {direction}", "{color} {shape} moving {direction}",
            "a {shape} that is {color} moves {direction}", "the {color} {shape} slides {direction}"};
}

std::vector<std::string> render_captions(const VideoFacts& facts, std::size_t count) {
    const auto templates = caption_templates(facts.motion);
    if (count > templates.size()) throw ConfigError("render_captions: not enough templates");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::string c = templates[i];
        auto fill = [&c](const std::string& slot, std::string_view value) {
            for (auto pos = c.find(slot); pos != std::string::npos; pos = c.find(slot)) c.replace(pos, slot.size(), value);
        };
        fill("{color}", facts.color);
        fill("{shape}", shape_name(facts.shape));
        fill("{direction}", motion_name(facts.motion));
        out.push_back(c);
    }
    return out;
}

std::vector<text::CaptionRecord> generate_dataset(const SyntheticSpec& spec, const std::filesystem::path& out) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out / "videos", ec);
    if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    const auto facts = assign_facts(spec);
    std::vector<text::CaptionRecord> records;
    const std::size_t first_val = spec.videos - spec.val_videos - spec.test_videos;
    const std::size_t first_test = spec.videos - spec.test_videos;
    for (std::size_t i = 0; i < spec.videos; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "vid%04zu", i);
        text::CaptionRecord r;
        r.id = id;
        r.video = "videos/" + r.id + ".vvid";
        r.captions = render_captions(facts[i], spec.paraphrases);
        for (const auto& c : r.captions) r.tokens.push_back(text::normalize_and_tokenize(c));
        r.split = i >= first_test ? text::Split::Test : i >= first_val ? text::Split::Val : text::Split::Train;
        write_vvid(out / r.video, render_video(spec, facts[i], spec.seed * 1000003ULL + i + 1));
        records.push_back(std::move(r));
    }
    text::write_corpus(out / "corpus.jsonl", records);
    for (auto split : {text::Split::Train, text::Split::Val, text::Split::Test}) {
        text::write_corpus(out / (std::string(text::split_name(split)) + ".jsonl"), text::filter_split(records, split));
    }
    std::ofstream os(out / "spec.json", std::ios::trunc);
    if (!os) throw DataError("cannot write " + (out / "spec.json").string());
    os << spec.to_json() << '\n';
    return records;
}

} // namespace vidcap::synth
