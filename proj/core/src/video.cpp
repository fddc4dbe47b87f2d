#include "vidcap/video.hpp"

#include "vidcap/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace vidcap {
namespace {

constexpr std::array<char, 4> kMagic{'V', 'V', 'I', 'D'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("vvid: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_vvid(const std::filesystem::path& path, const VideoClip& clip) {
    if (clip.pixels.size() != clip.frames * clip.frame_size()) throw std::invalid_argument("vvid: pixel count mismatch");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("vvid: cannot open " + path.string() + " for writing");
    os.write(kMagic.data(), kMagic.size());
    os.put(static_cast<char>(kVersion));
    put_u32(os, static_cast<std::uint32_t>(clip.frames));
    put_u32(os, static_cast<std::uint32_t>(clip.height));
    put_u32(os, static_cast<std::uint32_t>(clip.width));
    put_u32(os, static_cast<std::uint32_t>(clip.channels));
    for (float f : clip.pixels) put_u32(os, std::bit_cast<std::uint32_t>(f));
    if (!os) throw DataError("vvid: write failed for " + path.string());
}

VideoClip read_vvid(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("vvid: cannot open " + path.string());
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("vvid: bad magic in " + path.string());
    const int version = is.get();
    if (version != kVersion) throw DataError("vvid: unsupported version " + std::to_string(version));
    VideoClip clip;
    clip.frames = get_u32(is);
    clip.height = get_u32(is);
    clip.width = get_u32(is);
    clip.channels = get_u32(is);
    const std::size_t n = clip.frames * clip.frame_size();
    clip.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) clip.pixels[i] = std::bit_cast<float>(get_u32(is));
    return clip;
}

} // namespace vidcap
