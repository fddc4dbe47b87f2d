#pragma once

#include "vidcap/textproc.hpp"
#include "vidcap/video.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vidcap::synth {

enum class ShapeKind { Square, Circle, Triangle };
enum class Motion { Left, Right, Up, Down, Static };

ShapeKind parse_shape(std::string_view s);
std::string_view shape_name(ShapeKind s);
Motion parse_motion(std::string_view s);
std::string_view motion_name(Motion m);

struct SyntheticSpec {
    std::size_t videos = 16;
    std::size_t frames = 16;
    std::size_t height = 16;
    std::size_t width = 16;
    std::vector<ShapeKind> shapes{ShapeKind::Square, ShapeKind::Circle, ShapeKind::Triangle};
    std::vector<std::string> colors{"red", "green", "blue", "yellow"};
    std::vector<Motion> motions{Motion::Left, Motion::Right, Motion::Up, Motion::Down};
    double static_prefix = 0.5;   ///< fraction of frames before the motion starts, in [0,1)
    std::size_t paraphrases = 1;  ///< captions per video, drawn from the template list in order
    double noise = 0.0;           ///< stddev of additive pixel noise
    std::size_t val_videos = 0;   ///< the last val+test videos go to those splits
    std::size_t test_videos = 0;
    std::uint64_t seed = 0;

    void validate() const;
    static SyntheticSpec from_json(std::string_view json);
    static SyntheticSpec load(const std::filesystem::path& path);
    std::string to_json() const;
};

struct VideoFacts {
    ShapeKind shape = ShapeKind::Square;
    std::string color;
    Motion motion = Motion::Left;
};

/// The color table used for rendering; unknown colors are a data error.
std::vector<float> color_rgb(const std::string& color);

/// Number of frames before motion starts.
std::size_t static_prefix_frames(const SyntheticSpec& spec);

/// Distinct (shape, color, motion) combinations in a seeded order, cycling once exhausted.
std::vector<VideoFacts> assign_facts(const SyntheticSpec& spec);

VideoClip render_video(const SyntheticSpec& spec, const VideoFacts& facts, std::uint64_t noise_seed);

/// Templates in paraphrase order; the first is "a {color} {shape} moves {direction}".
std::vector<std::string> caption_templates(Motion motion);
std::vector<std::string> render_captions(const VideoFacts& facts, std::size_t count);

/// Writes videos/*.vvid, corpus.jsonl, train/val/test.jsonl and spec.json under `out`.
std::vector<text::CaptionRecord> generate_dataset(const SyntheticSpec& spec, const std::filesystem::path& out);

} // namespace vidcap::synth
