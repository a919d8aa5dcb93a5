#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tempro/tensor.hpp"

namespace tempro::sim {

/// One moving point target in uniform linear motion.
struct TargetTrack {
    double x0 = 0.0, y0 = 0.0;      // sub-pixel start position
    double vx = 0.0, vy = 0.0;      // pixels per frame
    double sigma_spatial = 1.0;     // Gaussian radius in pixels
    double peak_intensity = 1.0;    // gray units
    int t_enter = 0;
    int t_exit = 0;                 // exclusive

    void validate(int frames) const;
    double cx(int t) const { return x0 + vx * t; }
    double cy(int t) const { return y0 + vy * t; }
};

/// Per-pixel sensor noise: additive Gaussian per frame plus fixed-pattern
/// gain/offset held constant across the sequence.
struct NoiseConfig {
    double sigma_n = 0.0;  // std of the per-frame additive Gaussian
    double sigma_g = 0.0;  // gain uniform on (1-sigma_g, 1+sigma_g)
    double sigma_o = 0.0;  // std of the additive offset FPN
    std::uint64_t seed = 0;

    void validate() const;
};

struct Sequence {
    std::string name;
    Tensor frames;                    // [T,H,W]
    Tensor masks;                     // [T,H,W] in {0,1}; undefined if absent
    std::vector<TargetTrack> tracks;
    NoiseConfig noise;
    double snr = 0.0;                 // measured, 0 when unknown

    std::int64_t frames_count() const { return frames.extent(0); }
    std::int64_t height() const { return frames.extent(1); }
    std::int64_t width() const { return frames.extent(2); }
    bool has_mask() const { return masks.defined(); }
};

/// Renders the noiseless contribution of one track at frame t as an isotropic
/// 2-D Gaussian blob, cut off beyond 4 sigma.
Tensor render_target(const TargetTrack& track, int t, std::int64_t H, std::int64_t W);

/// True when the track center is inside the image and t in [t_enter, t_exit).
bool track_visible(const TargetTrack& track, int t, std::int64_t H, std::int64_t W);

/// Mask of one track at frame t: pixels whose noiseless contribution is at
/// least half of that frame's peak contribution.
std::vector<std::uint8_t> track_mask(const TargetTrack& track, int t, std::int64_t H, std::int64_t W);

/// out(t,y,x) = g(y,x) * clean(t,y,x) + o(y,x) + n(t,y,x).
Tensor apply_noise(const Tensor& clean, const NoiseConfig& cfg);

/// Local-contrast SNR: per visible (track, frame), (mean masked target value -
/// mean local background) / std of local background; the local background is a
/// 21x21 window around the track center with all mask pixels excluded.
/// Sequence SNR is the mean over the visible instances.
double measure_snr(const Sequence& seq);

/// Background/clutter classes for the synthetic scenes.
enum class BackgroundKind { Constant, Gradient, Cloud };

struct SceneConfig {
    BackgroundKind kind = BackgroundKind::Constant;
    double level = 100.0;        // base gray level
    double gradient_span = 0.0;  // total gray rise across the frame (Gradient)
    double cloud_amplitude = 0.0;
    double cloud_drift = 0.0;    // pixels per frame of cloud motion
    double flicker_amplitude = 0.0;  // per-pixel sinusoid amplitude
    double flicker_period = 16.0;    // frames
};

/// Renders the noiseless background cube [T,H,W].
Tensor render_background(const SceneConfig& scene, std::int64_t T, std::int64_t H, std::int64_t W,
                         std::uint64_t seed);

struct Range {
    double lo = 0.0, hi = 0.0;
    double sample(std::mt19937_64& rng) const;
};

/// Distribution over scenes/tracks/noise for one split of a dataset.
struct SplitSpec {
    std::string name = "train";
    int count = 0;
    Range snr{5.0, 8.0};
    Range target_sigma{0.7, 1.5};
    Range target_speed{0.2, 1.0};
    int min_targets = 1;
    int max_targets = 1;
    std::vector<BackgroundKind> backgrounds{BackgroundKind::Constant};
    Range background_level{80.0, 120.0};
    Range gradient_span{10.0, 40.0};
    Range cloud_amplitude{4.0, 12.0};
    double cloud_drift_prob = 0.5;
    double flicker_prob = 0.0;
    Range flicker_amplitude{1.0, 3.0};
};

struct DatasetSpec {
    std::int64_t frames = 40, height = 64, width = 64;
    NoiseConfig noise{8.0, 0.15, 1.3, 0};
    std::vector<SplitSpec> splits;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Deterministically generates `spec` sequences; sequence i draws its RNG
/// stream from (spec.seed, i). Names are "<split>_<index>".
std::vector<Sequence> generate_dataset(const DatasetSpec& spec);

/// Split assignment parallel to generate_dataset() output order.
std::vector<std::string> dataset_split_names(const DatasetSpec& spec);

}  // namespace tempro::sim
