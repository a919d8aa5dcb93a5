#include "tempro/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace tempro::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ (stream + 0x51ed2701)));
}

constexpr int kSnrWindow = 21;  // local-background window side

}  // namespace

void TargetTrack::validate(int frames) const {
    if (sigma_spatial <= 0.0) throw ShapeError("TargetTrack: sigma_spatial must be > 0");
    if (peak_intensity <= 0.0) throw ShapeError("TargetTrack: peak_intensity must be > 0");
    if (!(0 <= t_enter && t_enter < t_exit && t_exit <= frames))
        throw ShapeError("TargetTrack: need 0 <= t_enter < t_exit <= T");
}

void NoiseConfig::validate() const {
    if (sigma_n < 0.0 || sigma_g < 0.0 || sigma_o < 0.0)
        throw ShapeError("NoiseConfig: sigmas must be >= 0");
    if (sigma_g >= 1.0) throw ShapeError("NoiseConfig: sigma_g must be < 1");
}

Tensor render_target(const TargetTrack& track, int t, std::int64_t H, std::int64_t W) {
    Tensor img = Tensor::zeros({H, W});
    auto d = img.mutable_data();
    const double cx = track.cx(t);
    const double cy = track.cy(t);
    const double s = track.sigma_spatial;
    const double support = 4.0 * s;
    const std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cx - support)));
    const std::int64_t x1 = std::min<std::int64_t>(W - 1, static_cast<std::int64_t>(std::ceil(cx + support)));
    const std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cy - support)));
    const std::int64_t y1 = std::min<std::int64_t>(H - 1, static_cast<std::int64_t>(std::ceil(cy + support)));
    const double inv2s2 = 1.0 / (2.0 * s * s);
    for (std::int64_t y = y0; y <= y1; ++y) {
        for (std::int64_t x = x0; x <= x1; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            const double r2 = dx * dx + dy * dy;
            if (r2 > support * support) continue;
            d[static_cast<std::size_t>(y * W + x)] = track.peak_intensity * std::exp(-r2 * inv2s2);
        }
    }
    return img;
}

bool track_visible(const TargetTrack& track, int t, std::int64_t H, std::int64_t W) {
    if (t < track.t_enter || t >= track.t_exit) return false;
    const double cx = track.cx(t);
    const double cy = track.cy(t);
    return cx >= 0.0 && cx <= static_cast<double>(W - 1) && cy >= 0.0 && cy <= static_cast<double>(H - 1);
}

std::vector<std::uint8_t> track_mask(const TargetTrack& track, int t, std::int64_t H, std::int64_t W) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(H * W), 0);
    if (!track_visible(track, t, H, W)) return mask;
    Tensor img = render_target(track, t, H, W);
    const auto d = img.data();
    double peak = 0.0;
    for (double v : d) peak = std::max(peak, v);
    if (peak <= 0.0) return mask;
    const double thresh = 0.5 * peak;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] >= thresh) mask[i] = 1;
    return mask;
}

Tensor apply_noise(const Tensor& clean, const NoiseConfig& cfg) {
    cfg.validate();
    if (clean.dim() != 3) throw ShapeError("apply_noise: expected [T,H,W]");
    for (double v : clean.data())
        if (v < 0.0) throw ShapeError("apply_noise: clean values must be >= 0");
    const std::int64_t T = clean.extent(0), H = clean.extent(1), W = clean.extent(2);
    const std::int64_t HW = H * W;
    Tensor out = Tensor::zeros(clean.shape());
    auto o = out.mutable_data();
    const auto c = clean.data();

    if (cfg.sigma_n == 0.0 && cfg.sigma_g == 0.0 && cfg.sigma_o == 0.0) {
        std::copy(c.begin(), c.end(), o.begin());
        return out;
    }

    std::mt19937_64 rng = make_rng(cfg.seed, 0);
    std::vector<double> gain(static_cast<std::size_t>(HW), 1.0);
    std::vector<double> offset(static_cast<std::size_t>(HW), 0.0);
    if (cfg.sigma_g > 0.0) {
        std::uniform_real_distribution<double> ug(1.0 - cfg.sigma_g, 1.0 + cfg.sigma_g);
        for (auto& g : gain) g = ug(rng);
    }
    if (cfg.sigma_o > 0.0) {
        std::normal_distribution<double> no(0.0, cfg.sigma_o);
        for (auto& off : offset) off = no(rng);
    }
    if (cfg.sigma_n > 0.0) {
        std::normal_distribution<double> nn(0.0, cfg.sigma_n);
        for (std::int64_t t = 0; t < T; ++t) {
            const double* cp = c.data() + t * HW;
            double* op = o.data() + t * HW;
            for (std::int64_t i = 0; i < HW; ++i)
                op[i] = gain[static_cast<std::size_t>(i)] * cp[i] + offset[static_cast<std::size_t>(i)] + nn(rng);
        }
    } else {
        for (std::int64_t t = 0; t < T; ++t) {
            const double* cp = c.data() + t * HW;
            double* op = o.data() + t * HW;
            for (std::int64_t i = 0; i < HW; ++i)
                op[i] = gain[static_cast<std::size_t>(i)] * cp[i] + offset[static_cast<std::size_t>(i)];
        }
    }
    return out;
}

double measure_snr(const Sequence& seq) {
    if (!seq.has_mask()) throw ShapeError("measure_snr: sequence has no masks");
    if (seq.tracks.empty()) throw ShapeError("measure_snr: sequence has no tracks");
    const std::int64_t T = seq.frames_count(), H = seq.height(), W = seq.width();
    const std::int64_t HW = H * W;
    const auto frames = seq.frames.data();
    const auto masks = seq.masks.data();

    double total = 0.0;
    int instances = 0;
    const int half = kSnrWindow / 2;
    for (const TargetTrack& track : seq.tracks) {
        for (int t = 0; t < T; ++t) {
            if (!track_visible(track, t, H, W)) continue;
            const std::vector<std::uint8_t> tmask = track_mask(track, t, H, W);
            double tsum = 0.0;
            int tcount = 0;
            const double* frame = frames.data() + static_cast<std::int64_t>(t) * HW;
            const double* mframe = masks.data() + static_cast<std::int64_t>(t) * HW;
            for (std::int64_t i = 0; i < HW; ++i) {
                if (tmask[static_cast<std::size_t>(i)]) {
                    tsum += frame[i];
                    ++tcount;
                }
            }
            if (tcount == 0) continue;
            const std::int64_t cx = std::llround(track.cx(t));
            const std::int64_t cy = std::llround(track.cy(t));
            double bsum = 0.0, bsq = 0.0;
            int bcount = 0;
            for (std::int64_t y = std::max<std::int64_t>(0, cy - half); y <= std::min<std::int64_t>(H - 1, cy + half); ++y) {
                for (std::int64_t x = std::max<std::int64_t>(0, cx - half); x <= std::min<std::int64_t>(W - 1, cx + half); ++x) {
                    const std::int64_t i = y * W + x;
                    if (mframe[i] != 0.0) continue;  // exclude every target pixel
                    bsum += frame[i];
                    bsq += frame[i] * frame[i];
                    ++bcount;
                }
            }
            if (bcount < 2) continue;
            const double bmean = bsum / bcount;
            const double bvar = std::max(0.0, bsq / bcount - bmean * bmean);
            const double bstd = std::sqrt(bvar);
            if (bstd <= 1e-12)
                throw NumericError("measure_snr: local background has zero variance");
            total += (tsum / tcount - bmean) / bstd;
            ++instances;
        }
    }
    if (instances == 0) throw ShapeError("measure_snr: no visible target instances");
    return total / instances;
}

double Range::sample(std::mt19937_64& rng) const {
    if (hi <= lo) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Tensor render_background(const SceneConfig& scene, std::int64_t T, std::int64_t H, std::int64_t W,
                         std::uint64_t seed) {
    Tensor bg = Tensor::zeros({T, H, W});
    auto d = bg.mutable_data();
    const std::int64_t HW = H * W;
    std::mt19937_64 rng = make_rng(seed, 1);

    switch (scene.kind) {
        case BackgroundKind::Constant: {
            std::fill(d.begin(), d.end(), scene.level);
            break;
        }
        case BackgroundKind::Gradient: {
            const double ang = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
            const double gx = std::cos(ang), gy = std::sin(ang);
            const double norm = scene.gradient_span / static_cast<double>(std::max(H, W));
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x)
                    d[static_cast<std::size_t>(y * W + x)] =
                        scene.level + norm * (gx * static_cast<double>(x) + gy * static_cast<double>(y));
            for (std::int64_t t = 1; t < T; ++t)
                std::copy(d.begin(), d.begin() + HW, d.begin() + t * HW);
            break;
        }
        case BackgroundKind::Cloud: {
            // Low-frequency field: coarse white noise, box-smoothed, bilinearly
            // sampled with an optional per-frame drift.
            const std::int64_t cs = 8;  // coarse cell size in pixels
            const std::int64_t pad = 4 + static_cast<std::int64_t>(std::ceil(std::abs(scene.cloud_drift) * T / cs));
            const std::int64_t Hc = H / cs + 2 * pad + 2, Wc = W / cs + 2 * pad + 2;
            std::vector<double> coarse(static_cast<std::size_t>(Hc * Wc));
            std::normal_distribution<double> nd(0.0, 1.0);
            for (auto& v : coarse) v = nd(rng);
            // Two box-blur passes give a smooth cloud-like field.
            for (int pass = 0; pass < 2; ++pass) {
                std::vector<double> tmp = coarse;
                for (std::int64_t y = 1; y + 1 < Hc; ++y)
                    for (std::int64_t x = 1; x + 1 < Wc; ++x) {
                        double s = 0.0;
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx)
                                s += tmp[static_cast<std::size_t>((y + dy) * Wc + (x + dx))];
                        coarse[static_cast<std::size_t>(y * Wc + x)] = s / 9.0;
                    }
            }
            const double dang = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
            const double dx_per_t = scene.cloud_drift * std::cos(dang) / cs;
            const double dy_per_t = scene.cloud_drift * std::sin(dang) / cs;
            for (std::int64_t t = 0; t < T; ++t) {
                const double ox = static_cast<double>(pad) + dx_per_t * t;
                const double oy = static_cast<double>(pad) + dy_per_t * t;
                for (std::int64_t y = 0; y < H; ++y) {
                    for (std::int64_t x = 0; x < W; ++x) {
                        const double fy = oy + static_cast<double>(y) / cs;
                        const double fx = ox + static_cast<double>(x) / cs;
                        const std::int64_t iy = static_cast<std::int64_t>(fy);
                        const std::int64_t ix = static_cast<std::int64_t>(fx);
                        const double ay = fy - iy, ax = fx - ix;
                        const double v00 = coarse[static_cast<std::size_t>(iy * Wc + ix)];
                        const double v01 = coarse[static_cast<std::size_t>(iy * Wc + ix + 1)];
                        const double v10 = coarse[static_cast<std::size_t>((iy + 1) * Wc + ix)];
                        const double v11 = coarse[static_cast<std::size_t>((iy + 1) * Wc + ix + 1)];
                        const double v = (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
                        d[static_cast<std::size_t>(t * HW + y * W + x)] =
                            std::max(1.0, scene.level + scene.cloud_amplitude * 3.0 * v);
                    }
                }
            }
            break;
        }
    }

    if (scene.flicker_amplitude > 0.0) {
        // Sparse per-pixel sinusoids: camera blind elements / flickering cells.
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_real_distribution<double> uph(0.0, 2.0 * M_PI);
        for (std::int64_t i = 0; i < HW; ++i) {
            if (u01(rng) > 0.02) continue;
            const double a = scene.flicker_amplitude * u01(rng);
            const double ph = uph(rng);
            for (std::int64_t t = 0; t < T; ++t) {
                double& v = d[static_cast<std::size_t>(t * HW + i)];
                v = std::max(0.0, v + a * std::sin(2.0 * M_PI * t / scene.flicker_period + ph));
            }
        }
    }
    return bg;
}

void DatasetSpec::validate() const {
    if (frames < 1 || height < 1 || width < 1) throw ShapeError("DatasetSpec: dimensions must be positive");
    noise.validate();
    for (const auto& s : splits) {
        if (s.count < 0) throw ShapeError("DatasetSpec: split count must be >= 0");
        if (s.min_targets < 1 || s.max_targets < s.min_targets)
            throw ShapeError("DatasetSpec: bad target count range");
        if (s.backgrounds.empty()) throw ShapeError("DatasetSpec: split needs at least one background kind");
    }
}

namespace {

Sequence generate_sequence(const DatasetSpec& spec, const SplitSpec& split, int index_in_split,
                           std::uint64_t global_index) {
    const std::int64_t T = spec.frames, H = spec.height, W = spec.width;
    const std::int64_t HW = H * W;
    std::mt19937_64 rng = make_rng(spec.seed, 1000 + global_index);

    SceneConfig scene;
    scene.kind = split.backgrounds[std::uniform_int_distribution<std::size_t>(0, split.backgrounds.size() - 1)(rng)];
    scene.level = split.background_level.sample(rng);
    scene.gradient_span = split.gradient_span.sample(rng);
    scene.cloud_amplitude = split.cloud_amplitude.sample(rng);
    scene.cloud_drift = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < split.cloud_drift_prob ? 0.15 : 0.0;
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < split.flicker_prob) {
        scene.flicker_amplitude = split.flicker_amplitude.sample(rng);
    }
    Tensor background = render_background(scene, T, H, W, rng());

    const int n_targets = std::uniform_int_distribution<int>(split.min_targets, split.max_targets)(rng);
    std::vector<TargetTrack> tracks;

    // Rough local-background deviation for amplitude calibration: spatial
    // spread of the clean background plus the injected noise components.
    const auto bgd = background.data();
    double bmean = 0.0;
    for (double v : bgd) bmean += v;
    bmean /= static_cast<double>(bgd.size());

    for (int k = 0; k < n_targets; ++k) {
        TargetTrack tr;
        tr.sigma_spatial = split.target_sigma.sample(rng);
        const double speed = split.target_speed.sample(rng);
        const double ang = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
        tr.vx = speed * std::cos(ang);
        tr.vy = speed * std::sin(ang);
        const double margin = 10.0;
        const double px = std::uniform_real_distribution<double>(margin, W - 1 - margin)(rng);
        const double py = std::uniform_real_distribution<double>(margin, H - 1 - margin)(rng);
        tr.x0 = px - tr.vx * (T / 2.0);
        tr.y0 = py - tr.vy * (T / 2.0);
        tr.t_enter = 0;
        tr.t_exit = static_cast<int>(T);

        // Calibrate the amplitude so the measured local-contrast SNR lands
        // near the sampled value.
        const double snr_target = split.snr.sample(rng);
        const int tmid = static_cast<int>(T / 2);
        TargetTrack probe = tr;
        probe.peak_intensity = 1.0;
        Tensor blob = render_target(probe, tmid, H, W);
        const std::vector<std::uint8_t> pm = track_mask(probe, tmid, H, W);
        double att = 0.0;
        int attn = 0;
        const auto bv = blob.data();
        for (std::int64_t i = 0; i < HW; ++i)
            if (pm[static_cast<std::size_t>(i)]) {
                att += bv[i];
                ++attn;
            }
        att = attn > 0 ? att / attn : 1.0;
        const std::int64_t cx = std::llround(probe.cx(tmid)), cy = std::llround(probe.cy(tmid));
        double ws = 0.0, ws2 = 0.0;
        int wn = 0;
        const int half = kSnrWindow / 2;
        for (std::int64_t y = std::max<std::int64_t>(0, cy - half); y <= std::min<std::int64_t>(H - 1, cy + half); ++y)
            for (std::int64_t x = std::max<std::int64_t>(0, cx - half); x <= std::min<std::int64_t>(W - 1, cx + half); ++x) {
                const double v = bgd[static_cast<std::size_t>(tmid * HW + y * W + x)];
                ws += v;
                ws2 += v * v;
                ++wn;
            }
        const double wmean = ws / std::max(1, wn);
        const double wvar = std::max(0.0, ws2 / std::max(1, wn) - wmean * wmean);
        const double gain_var = spec.noise.sigma_g * spec.noise.sigma_g / 3.0 * wmean * wmean;
        const double sigma_local = std::sqrt(wvar + spec.noise.sigma_n * spec.noise.sigma_n +
                                             spec.noise.sigma_o * spec.noise.sigma_o + gain_var);
        tr.peak_intensity = std::max(1e-3, snr_target * std::max(sigma_local, 1e-6) / att);
        tr.validate(static_cast<int>(T));
        tracks.push_back(tr);
    }

    Tensor clean = background.clone();
    Tensor masks = Tensor::zeros({T, H, W});
    auto cd = clean.mutable_data();
    auto md = masks.mutable_data();
    for (const TargetTrack& tr : tracks) {
        for (std::int64_t t = 0; t < T; ++t) {
            if (!track_visible(tr, static_cast<int>(t), H, W)) continue;
            Tensor blob = render_target(tr, static_cast<int>(t), H, W);
            const auto bvals = blob.data();
            const std::vector<std::uint8_t> tm = track_mask(tr, static_cast<int>(t), H, W);
            for (std::int64_t i = 0; i < HW; ++i) {
                cd[static_cast<std::size_t>(t * HW + i)] += bvals[i];
                if (tm[static_cast<std::size_t>(i)]) md[static_cast<std::size_t>(t * HW + i)] = 1.0;
            }
        }
    }

    Sequence seq;
    {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s_%03d", split.name.c_str(), index_in_split);
        seq.name = buf;
    }
    seq.noise = spec.noise;
    seq.noise.seed = rng();
    seq.frames = apply_noise(clean, seq.noise);
    seq.masks = masks;
    seq.tracks = std::move(tracks);
    seq.snr = measure_snr(seq);
    return seq;
}

}  // namespace

std::vector<Sequence> generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    std::vector<Sequence> out;
    std::uint64_t global = 0;
    for (const SplitSpec& split : spec.splits) {
        for (int i = 0; i < split.count; ++i, ++global) {
            out.push_back(generate_sequence(spec, split, i, global));
        }
    }
    return out;
}

std::vector<std::string> dataset_split_names(const DatasetSpec& spec) {
    std::vector<std::string> names;
    for (const SplitSpec& split : spec.splits)
        for (int i = 0; i < split.count; ++i) names.push_back(split.name);
    return names;
}

}  // namespace tempro::sim
