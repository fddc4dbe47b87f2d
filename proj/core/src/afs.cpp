#include "vidcap/afs.hpp"

#include "vidcap/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vidcap::afs {

Metric parse_metric(std::string_view name) {
    if (name == "mad") return Metric::Mad;
    if (name == "patch" || name == "patch_feature") return Metric::PatchFeature;
    throw ConfigError("unknown dissimilarity metric '" + std::string(name) + "' (expected mad|patch)");
}

std::string_view metric_name(Metric metric) { return metric == Metric::Mad ? "mad" : "patch"; }

namespace {

std::vector<double> patch_descriptor(const VideoClip& v, std::size_t t) {
    constexpr std::size_t kPatch = 4;
    const std::size_t ph = (v.height + kPatch - 1) / kPatch;
    const std::size_t pw = (v.width + kPatch - 1) / kPatch;
    std::vector<double> desc(ph * pw * v.channels, 0.0);
    for (std::size_t py = 0; py < ph; ++py) {
        for (std::size_t px = 0; px < pw; ++px) {
            const std::size_t y1 = std::min(v.height, (py + 1) * kPatch);
            const std::size_t x1 = std::min(v.width, (px + 1) * kPatch);
            const double count = static_cast<double>((y1 - py * kPatch) * (x1 - px * kPatch));
            for (std::size_t c = 0; c < v.channels; ++c) {
                double s = 0.0;
                for (std::size_t y = py * kPatch; y < y1; ++y) {
                    for (std::size_t x = px * kPatch; x < x1; ++x) s += v.at(t, y, x, c);
                }
                desc[(py * pw + px) * v.channels + c] = s / count;
            }
        }
    }
    return desc;
}

} // namespace

DissimilarityProfile frame_dissimilarity(const VideoClip& video, Metric metric) {
    if (video.frames == 0) throw DataError("empty video");
    DissimilarityProfile profile;
    profile.frames = video.frames;
    profile.d.reserve(video.frames - 1);
    const std::size_t fs = video.frame_size();
    if (metric == Metric::Mad) {
        for (std::size_t t = 0; t + 1 < video.frames; ++t) {
            const float* a = video.pixels.data() + t * fs;
            const float* b = a + fs;
            double s = 0.0;
            for (std::size_t i = 0; i < fs; ++i) s += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
            profile.d.push_back(fs ? s / static_cast<double>(fs) : 0.0);
        }
    } else {
        std::vector<double> prev = patch_descriptor(video, 0);
        for (std::size_t t = 1; t < video.frames; ++t) {
            std::vector<double> cur = patch_descriptor(video, t);
            double sq = 0.0;
            for (std::size_t i = 0; i < cur.size(); ++i) sq += (cur[i] - prev[i]) * (cur[i] - prev[i]);
            profile.d.push_back(std::sqrt(sq));
            prev = std::move(cur);
        }
    }
    return profile;
}

FrameCdf::FrameCdf(const DissimilarityProfile& profile) : frames_(profile.frames) {
    if (frames_ == 0) throw DataError("empty video");
    if (profile.d.size() != frames_ - 1) {
        throw std::invalid_argument("dissimilarity profile length " + std::to_string(profile.d.size()) +
                                    " does not match " + std::to_string(frames_) + " frames");
    }
    double total = 0.0;
    for (double v : profile.d) {
        if (!std::isfinite(v)) throw NumericError("non-finite dissimilarity");
        if (v < 0.0) throw DataError("negative dissimilarity");
        total += v;
    }
    values_.assign(frames_, 0.0);
    if (frames_ == 1) {
        values_[0] = 1.0;
        return;
    }
    const std::size_t segs = frames_ - 1;
    uniform_ = total == 0.0 || std::all_of(profile.d.begin(), profile.d.end(), [&](double v) { return v == profile.d[0]; });
    density_.assign(segs, 0.0);
    if (uniform_) {
        for (std::size_t t = 0; t < frames_; ++t) values_[t] = static_cast<double>(t) / static_cast<double>(segs);
        std::fill(density_.begin(), density_.end(), 1.0 / static_cast<double>(segs));
        return;
    }
    total_ = total;
    mass_ = profile.d;
    cumulative_.assign(frames_, 0.0);
    double prefix = 0.0;
    for (std::size_t t = 0; t < segs; ++t) {
        density_[t] = profile.d[t] / total;
        prefix += profile.d[t];
        cumulative_[t + 1] = prefix;
        values_[t + 1] = prefix / total;
    }
    values_[segs] = 1.0;
}

double FrameCdf::operator()(double x) const {
    if (frames_ <= 1) return 1.0;
    if (x <= 0.0) return 0.0;
    const double last = static_cast<double>(frames_ - 1);
    if (x >= last) return 1.0;
    const auto t = static_cast<std::size_t>(std::floor(x));
    return values_[t] + (x - static_cast<double>(t)) * (values_[t + 1] - values_[t]);
}

double FrameCdf::inverse(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("inverse_cdf: quantile outside [0,1]");
    if (frames_ <= 1 || q == 0.0) return 0.0;
    if (uniform_) return q * static_cast<double>(frames_ - 1);
    // first breakpoint t+1 with F(t+1) >= q; F(t) < q because t is minimal and F(0) = 0 < q
    const auto it = std::lower_bound(values_.begin() + 1, values_.end(), q);
    const auto t = static_cast<std::size_t>(it - values_.begin()) - 1;
    const double f0 = values_[t];
    const double f1 = values_[t + 1];
    const double x = static_cast<double>(t) + (q - f0) / (f1 - f0);
    return std::min(x, static_cast<double>(t + 1));
}

double FrameCdf::inverse_fraction(std::size_t k, std::size_t n) const {
    if (n == 0 || k > n) throw std::invalid_argument("inverse_fraction: need 0 <= k <= n, n >= 1");
    if (frames_ <= 1 || k == 0) return 0.0;
    if (uniform_) return static_cast<double>(k * (frames_ - 1)) / static_cast<double>(n);
    // Solve n * C(x) = k * S on the unnormalized CDF so that integer-valued profiles stay exact.
    const double nd = static_cast<double>(n);
    const double target = static_cast<double>(k) * total_;
    const auto it = std::lower_bound(cumulative_.begin() + 1, cumulative_.end(), target,
                                     [nd](double c, double v) { return nd * c < v; });
    if (it == cumulative_.end()) return static_cast<double>(frames_ - 1);
    const auto t = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    const double x = static_cast<double>(t) + (target - nd * cumulative_[t]) / (nd * mass_[t]);
    return std::min(x, static_cast<double>(t + 1));
}

FrameCdf build_cdf(const DissimilarityProfile& profile) { return FrameCdf(profile); }

double inverse_cdf(const FrameCdf& cdf, double q) { return cdf.inverse(q); }

FrameSelection select_frames(const FrameCdf& cdf, std::size_t n, bool dedupe) {
    if (n < 1) throw std::invalid_argument("select_frames: N must be >= 1");
    const std::size_t m = cdf.frames();
    FrameSelection sel;
    sel.dedupe = dedupe;
    for (std::size_t k = 0; k < n; ++k) {
        const double pos = cdf.inverse_fraction(k, n);
        sel.quantiles.push_back(static_cast<double>(k) / static_cast<double>(n));
        sel.positions.push_back(pos);
        const auto idx = static_cast<std::size_t>(std::round(pos));
        sel.indices.push_back(std::min(idx, m - 1));
    }
    if (!dedupe) return sel;

    std::vector<bool> used(m, false);
    std::vector<std::size_t> distinct;
    for (auto i : sel.indices) {
        if (!used[i]) {
            used[i] = true;
            distinct.push_back(i);
        }
    }
    // A frame's mass is the mean of its two adjacent segment masses.
    const auto& dens = cdf.density();
    std::vector<double> mass(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (i > 0) mass[i] += 0.5 * dens[i - 1];
        if (i + 1 < m) mass[i] += 0.5 * dens[i];
    }
    while (distinct.size() < n && distinct.size() < m) {
        std::size_t best = m;
        for (std::size_t i = 0; i < m; ++i) {
            if (used[i]) continue;
            if (best == m || mass[i] > mass[best]) best = i;
        }
        used[best] = true;
        distinct.push_back(best);
    }
    std::sort(distinct.begin(), distinct.end());
    while (distinct.size() < n) distinct.push_back(distinct.back());
    sel.indices = std::move(distinct);
    return sel;
}

VideoClip apply_selection(const VideoClip& video, const FrameSelection& selection) {
    VideoClip out(selection.indices.size(), video.height, video.width, video.channels);
    const std::size_t fs = video.frame_size();
    for (std::size_t k = 0; k < selection.indices.size(); ++k) {
        const std::size_t src = selection.indices[k];
        if (src >= video.frames) {
            throw std::out_of_range("apply_selection: frame index " + std::to_string(src) + " >= " +
                                    std::to_string(video.frames));
        }
        std::copy_n(video.pixels.begin() + static_cast<std::ptrdiff_t>(src * fs), fs,
                    out.pixels.begin() + static_cast<std::ptrdiff_t>(k * fs));
    }
    return out;
}

std::vector<std::size_t> uniform_indices(std::size_t frames, std::size_t n) {
    if (frames == 0 || n == 0) throw std::invalid_argument("uniform_indices: frames and N must be positive");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n; ++k) out.push_back((2 * k * (frames - 1) + n) / (2 * n));
    return out;
}

} // namespace vidcap::afs
