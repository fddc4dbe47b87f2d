#pragma once

// Adaptive frame selection: a dissimilarity profile over consecutive frames is
// read as a density on the frame axis, and N frames are drawn at the uniform
// quantiles k/N of its piecewise-linear CDF.

#include "vidcap/video.hpp"

#include <cstddef>
#include <string_view>
#include <vector>

namespace vidcap::afs {

enum class Metric {
    Mad,          ///< mean absolute pixel difference
    PatchFeature, ///< L2 distance between 4x4 patch-mean descriptors
};

Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric metric);

/// d[t] = dissimilarity(frame t, frame t+1), t = 0..M-2.
struct DissimilarityProfile {
    std::size_t frames = 0;
    std::vector<double> d;
};

/// Piecewise-linear CDF over x in [0, M-1]; segment [t, t+1] carries mass d[t] / sum(d).
class FrameCdf {
public:
    FrameCdf() = default;
    explicit FrameCdf(const DissimilarityProfile& profile);

    std::size_t frames() const noexcept { return frames_; }
    /// F at the integer breakpoints 0..M-1.
    const std::vector<double>& values() const noexcept { return values_; }
    /// Normalized per-segment mass (the density f), length M-1.
    const std::vector<double>& density() const noexcept { return density_; }
    bool uniform() const noexcept { return uniform_; }

    double operator()(double x) const;
    /// Generalized inverse min{x : F(x) >= q}.
    double inverse(double q) const;
    /// F^-1(k/n) with the quantile formed exactly for uniform profiles.
    double inverse_fraction(std::size_t k, std::size_t n) const;

private:
    std::size_t frames_ = 0;
    bool uniform_ = true;
    std::vector<double> values_;
    std::vector<double> density_;
    std::vector<double> mass_;       // raw segment masses
    std::vector<double> cumulative_; // unnormalized F at the breakpoints
    double total_ = 0.0;
};

struct FrameSelection {
    std::vector<std::size_t> indices;
    std::vector<double> quantiles;
    std::vector<double> positions; ///< raw F^-1 values before rounding
    bool dedupe = false;
};

DissimilarityProfile frame_dissimilarity(const VideoClip& video, Metric metric);
FrameCdf build_cdf(const DissimilarityProfile& profile);
double inverse_cdf(const FrameCdf& cdf, double q);
FrameSelection select_frames(const FrameCdf& cdf, std::size_t n, bool dedupe = false);
VideoClip apply_selection(const VideoClip& video, const FrameSelection& selection);

/// Uniform baseline: round(k (M-1) / N), half away from zero.
std::vector<std::size_t> uniform_indices(std::size_t frames, std::size_t n);

} // namespace vidcap::afs
