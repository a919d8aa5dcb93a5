// Test-only reference implementations, kept deliberately naive and
// independent of the library's compute paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "tempro/tensor.hpp"

namespace oracle {

using tempro::Tape;
using tempro::Tensor;

// Direct 7-loop zero-padded cross-correlation with centered taps.
inline std::vector<double> naive_conv3d(const std::vector<double>& in, std::int64_t Ci, std::int64_t T,
                                        std::int64_t H, std::int64_t W, const std::vector<double>& k,
                                        std::int64_t Co, std::int64_t kt, std::int64_t kh, std::int64_t kw,
                                        int dt = 1, int dh = 1, int dw = 1) {
    std::vector<double> out(static_cast<std::size_t>(Co * T * H * W), 0.0);
    const std::int64_t lot = (kt - 1) * dt / 2, loh = (kh - 1) * dh / 2, low = (kw - 1) * dw / 2;
    for (std::int64_t co = 0; co < Co; ++co)
        for (std::int64_t t = 0; t < T; ++t)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (std::int64_t ci = 0; ci < Ci; ++ci)
                        for (std::int64_t a = 0; a < kt; ++a)
                            for (std::int64_t b = 0; b < kh; ++b)
                                for (std::int64_t c = 0; c < kw; ++c) {
                                    const std::int64_t ti = t + a * dt - lot;
                                    const std::int64_t yi = y + b * dh - loh;
                                    const std::int64_t xi = x + c * dw - low;
                                    if (ti < 0 || ti >= T || yi < 0 || yi >= H || xi < 0 || xi >= W) continue;
                                    acc += in[static_cast<std::size_t>(((ci * T + ti) * H + yi) * W + xi)] *
                                           k[static_cast<std::size_t>((((co * Ci + ci) * kt + a) * kh + b) * kw + c)];
                                }
                    out[static_cast<std::size_t>(((co * T + t) * H + y) * W + x)] = acc;
                }
    return out;
}

// Per-pixel row-vector x matrix product over the time axis.
inline std::vector<double> naive_matmul_time(const std::vector<double>& f, std::int64_t C, std::int64_t T,
                                             std::int64_t H, std::int64_t W, const std::vector<double>& scorm) {
    std::vector<double> out(f.size(), 0.0);
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x)
                for (std::int64_t u = 0; u < T; ++u) {
                    double acc = 0.0;
                    for (std::int64_t t = 0; t < T; ++t)
                        acc += f[static_cast<std::size_t>(((c * T + t) * H + y) * W + x)] *
                               scorm[static_cast<std::size_t>(t * T + u)];
                    out[static_cast<std::size_t>(((c * T + u) * H + y) * W + x)] = acc;
                }
    return out;
}

// First line of the temporal-difference form: sum_j w_j (2 f_j - f_{j+1} - f_{j-1})
// evaluated on the dilated tap grid with zero padding.
inline std::vector<double> td_line1(const std::vector<double>& in, std::int64_t Ci, std::int64_t T,
                                    std::int64_t H, std::int64_t W, const std::vector<double>& w,
                                    std::int64_t Co, std::int64_t l, std::int64_t kh, std::int64_t kw, int dt) {
    std::vector<double> out(static_cast<std::size_t>(Co * T * H * W), 0.0);
    // Taps live on the (l+2)-long dilated grid centered like td_conv's padding.
    const std::int64_t lot = (l + 1) * dt / 2;
    const std::int64_t loh = (kh - 1) / 2, low = (kw - 1) / 2;
    auto at = [&](std::int64_t ci, std::int64_t t, std::int64_t y, std::int64_t x) -> double {
        if (t < 0 || t >= T || y < 0 || y >= H || x < 0 || x >= W) return 0.0;
        return in[static_cast<std::size_t>(((ci * T + t) * H + y) * W + x)];
    };
    for (std::int64_t co = 0; co < Co; ++co)
        for (std::int64_t t = 0; t < T; ++t)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (std::int64_t ci = 0; ci < Ci; ++ci)
                        for (std::int64_t j = 0; j < l; ++j)  // w_j sits at grid slot j+1
                            for (std::int64_t b = 0; b < kh; ++b)
                                for (std::int64_t c = 0; c < kw; ++c) {
                                    const double wj = w[static_cast<std::size_t>(
                                        (((co * Ci + ci) * l + j) * kh + b) * kw + c)];
                                    const std::int64_t tj = t + (j + 1) * dt - lot;
                                    const std::int64_t yi = y + b - loh, xi = x + c - low;
                                    acc += wj * (2.0 * at(ci, tj, yi, xi) - at(ci, tj + dt, yi, xi) -
                                                 at(ci, tj - dt, yi, xi));
                                }
                    out[static_cast<std::size_t>(((co * T + t) * H + y) * W + x)] = acc;
                }
    return out;
}

// First line of the spatial-difference form:
// sum_tau [ w_c x_c + sum_{i != c} w_i (x_c - x_i) ] on the dilated window.
inline std::vector<double> sd_line1(const std::vector<double>& in, std::int64_t Ci, std::int64_t T,
                                    std::int64_t H, std::int64_t W, const std::vector<double>& w,
                                    std::int64_t Co, std::int64_t l, std::int64_t k, int ds) {
    std::vector<double> out(static_cast<std::size_t>(Co * T * H * W), 0.0);
    const std::int64_t lot = (l - 1) / 2;
    const std::int64_t lo = (k - 1) * ds / 2;
    const std::int64_t center = (k * k - 1) / 2;
    auto at = [&](std::int64_t ci, std::int64_t t, std::int64_t y, std::int64_t x) -> double {
        if (t < 0 || t >= T || y < 0 || y >= H || x < 0 || x >= W) return 0.0;
        return in[static_cast<std::size_t>(((ci * T + t) * H + y) * W + x)];
    };
    for (std::int64_t co = 0; co < Co; ++co)
        for (std::int64_t t = 0; t < T; ++t)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x) {
                    double acc = 0.0;
                    for (std::int64_t ci = 0; ci < Ci; ++ci)
                        for (std::int64_t tau = 0; tau < l; ++tau) {
                            const std::int64_t tt = t + tau - lot;
                            const double xc = at(ci, tt, y, x);
                            for (std::int64_t i = 0; i < k * k; ++i) {
                                const double wi = w[static_cast<std::size_t>(
                                    (((co * Ci + ci) * l + tau) * k + i / k) * k + i % k)];
                                if (i == center) {
                                    acc += wi * xc;
                                } else {
                                    const std::int64_t yi = y + (i / k) * ds - lo;
                                    const std::int64_t xi = x + (i % k) * ds - lo;
                                    acc += wi * (xc - at(ci, tt, yi, xi));
                                }
                            }
                        }
                    out[static_cast<std::size_t>(((co * T + t) * H + y) * W + x)] = acc;
                }
    return out;
}

// Central finite-difference check of d(loss)/d(params). `build` must
// reconstruct the loss from the live parameter tensors on a fresh tape.
inline double max_grad_rel_err(std::vector<Tensor> params, const std::function<Tensor(Tape&)>& build,
                               double h = 1e-5) {
    for (Tensor& p : params) p.zero_grad();
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor loss = build(tape);
        tape.backward(loss);
        for (Tensor& p : params) {
            if (p.has_grad()) {
                analytic.emplace_back(p.grad().begin(), p.grad().end());
            } else {
                analytic.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
            }
        }
    }
    auto eval = [&]() {
        Tape tape;
        return build(tape).value();
    };
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto d = params[pi].mutable_data();
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double orig = d[i];
            d[i] = orig + h;
            const double fp = eval();
            d[i] = orig - h;
            const double fm = eval();
            d[i] = orig;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = analytic[pi][i];
            if (std::abs(num) < 1e-9 && std::abs(ana) < 1e-9) continue;
            worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6}));
        }
    }
    return worst;
}

inline Tensor random_tensor(tempro::Shape shape, std::mt19937_64& rng, double scale = 1.0,
                            bool requires_grad = false) {
    std::normal_distribution<double> nd(0.0, scale);
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.mutable_data()) v = nd(rng);
    return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Exhaustive pixel-ROC sweep over every unique confidence value, mirroring
// the report's conventions (>= threshold, appended endpoints, trapezoid).
struct RocOracle {
    double auc;
    std::vector<std::pair<double, double>> points;  // (fa, pd)
};

inline RocOracle roc_sweep(std::span<const double> conf, std::span<const double> gt) {
    std::vector<double> uniq(conf.begin(), conf.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::int64_t gt_pos = 0;
    for (double v : gt) gt_pos += v != 0.0 ? 1 : 0;
    const double total = static_cast<double>(conf.size());
    RocOracle out;
    for (auto it = uniq.rbegin(); it != uniq.rend(); ++it) {
        std::int64_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < conf.size(); ++i)
            if (conf[i] >= *it) (gt[i] != 0.0 ? tp : fp)++;
        out.points.emplace_back(static_cast<double>(fp) / total,
                                gt_pos > 0 ? static_cast<double>(tp) / static_cast<double>(gt_pos) : 0.0);
    }
    const double pd0 = out.points.empty() ? 0.0 : out.points.front().second;
    out.points.insert(out.points.begin(), {0.0, pd0});
    out.points.emplace_back(1.0, 1.0);
    out.auc = 0.0;
    for (std::size_t i = 1; i < out.points.size(); ++i)
        out.auc += (out.points[i].first - out.points[i - 1].first) * 0.5 *
                   (out.points[i].second + out.points[i - 1].second);
    return out;
}

// Brute-force maximum assignment for <= ~6 components a side: tries every
// injective pred -> gt mapping consistent with the distance limit.
inline int best_match_count(const std::vector<std::pair<double, double>>& pred,
                            const std::vector<std::pair<double, double>>& gt, double radius) {
    std::vector<int> gt_used(gt.size(), 0);
    std::function<int(std::size_t)> rec = [&](std::size_t p) -> int {
        if (p == pred.size()) return 0;
        int best = rec(p + 1);  // leave pred p unmatched
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (gt_used[g]) continue;
            const double dx = pred[p].first - gt[g].first;
            const double dy = pred[p].second - gt[g].second;
            if (std::sqrt(dx * dx + dy * dy) > radius) continue;
            gt_used[g] = 1;
            best = std::max(best, 1 + rec(p + 1));
            gt_used[g] = 0;
        }
        return best;
    };
    return rec(0);
}

}  // namespace oracle
