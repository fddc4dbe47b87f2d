#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace vidcap {

/// Dense T x H x W x C clip, pixel values in [0,1], stored in THWC order.
struct VideoClip {
    std::size_t frames = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<float> pixels;

    VideoClip() = default;
    VideoClip(std::size_t t, std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
        : frames(t), height(h), width(w), channels(c), pixels(t * h * w * c, fill) {}

    std::size_t frame_size() const noexcept { return height * width * channels; }
    float& at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) {
        return pixels[((t * height + y) * width + x) * channels + c];
    }
    float at(std::size_t t, std::size_t y, std::size_t x, std::size_t c) const {
        return pixels[((t * height + y) * width + x) * channels + c];
    }

    bool operator==(const VideoClip&) const = default;
};

// VVID container: "VVID", u8 version = 1, u32 LE T,H,W,C, then T*H*W*C f32 LE values.
void write_vvid(const std::filesystem::path& path, const VideoClip& clip);
VideoClip read_vvid(const std::filesystem::path& path);

} // namespace vidcap
