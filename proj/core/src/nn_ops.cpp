#include "tempro/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace tempro {

namespace {

struct ConvDims {
    std::int64_t ci, t, h, w;       // input
    std::int64_t co, kt, kh, kw;    // kernel
    int dt, dh, dw;                 // dilation
    std::int64_t lot, loh, low;     // left pad offsets
};

ConvDims check_conv(const Tensor& input, const Tensor& kernel, Dilation3 dil) {
    if (input.dim() != 4) throw ShapeError("conv3d: input must be [C,T,H,W], got " + shape_str(input.shape()));
    if (kernel.dim() != 5) throw ShapeError("conv3d: kernel must be [Co,Ci,kt,kh,kw], got " + shape_str(kernel.shape()));
    if (dil.t <= 0 || dil.h <= 0 || dil.w <= 0) throw ShapeError("conv3d: dilation must be positive");
    ConvDims d;
    d.ci = input.extent(0);
    d.t = input.extent(1);
    d.h = input.extent(2);
    d.w = input.extent(3);
    d.co = kernel.extent(0);
    d.kt = kernel.extent(2);
    d.kh = kernel.extent(3);
    d.kw = kernel.extent(4);
    if (kernel.extent(1) != d.ci)
        throw ShapeError("conv3d: kernel expects " + std::to_string(kernel.extent(1)) + " input channels, got " + std::to_string(d.ci));
    if (d.kt < 1 || d.kh < 1 || d.kw < 1) throw ShapeError("conv3d: empty kernel");
    d.dt = dil.t;
    d.dh = dil.h;
    d.dw = dil.w;
    d.lot = (d.kt - 1) * d.dt / 2;
    d.loh = (d.kh - 1) * d.dh / 2;
    d.low = (d.kw - 1) * d.dw / 2;
    return d;
}

// Shifted-plane accumulation: the workhorse of both conv passes. Applies
// dst(h,w) += k * src(h+oh, w+ow) over the in-bounds overlap.
inline void axpy_shifted(double* dst, const double* src, double k, std::int64_t H, std::int64_t W,
                         std::int64_t oh, std::int64_t ow) {
    const std::int64_t h0 = std::max<std::int64_t>(0, -oh);
    const std::int64_t h1 = std::min<std::int64_t>(H, H - oh);
    const std::int64_t w0 = std::max<std::int64_t>(0, -ow);
    const std::int64_t w1 = std::min<std::int64_t>(W, W - ow);
    if (h0 >= h1 || w0 >= w1) return;
    const std::int64_t len = w1 - w0;
    for (std::int64_t h = h0; h < h1; ++h) {
        double* drow = dst + h * W + w0;
        const double* srow = src + (h + oh) * W + (w0 + ow);
        for (std::int64_t i = 0; i < len; ++i) drow[i] += k * srow[i];
    }
}

inline double dot_shifted(const double* a, const double* b_shifted, std::int64_t H, std::int64_t W,
                          std::int64_t oh, std::int64_t ow) {
    const std::int64_t h0 = std::max<std::int64_t>(0, -oh);
    const std::int64_t h1 = std::min<std::int64_t>(H, H - oh);
    const std::int64_t w0 = std::max<std::int64_t>(0, -ow);
    const std::int64_t w1 = std::min<std::int64_t>(W, W - ow);
    double acc = 0.0;
    if (h0 >= h1 || w0 >= w1) return acc;
    const std::int64_t len = w1 - w0;
    for (std::int64_t h = h0; h < h1; ++h) {
        const double* arow = a + h * W + w0;
        const double* brow = b_shifted + (h + oh) * W + (w0 + ow);
        for (std::int64_t i = 0; i < len; ++i) acc += arow[i] * brow[i];
    }
    return acc;
}

void conv3d_backward(const ConvDims& d, const Tensor& input, const Tensor& kernel, BackwardCtx& ctx) {
    const bool need_din = ctx.needs_grad(0);
    const bool need_dk = ctx.needs_grad(1);
    const auto in = input.data();
    const auto kd = kernel.data();
    const auto gout = ctx.out_grad();
    std::span<double> din = need_din ? ctx.grad_for(0) : std::span<double>{};
    std::span<double> dk = need_dk ? ctx.grad_for(1) : std::span<double>{};
    const std::int64_t HW = d.h * d.w;
    const std::int64_t ktaps = d.kt * d.kh * d.kw;
    for (std::int64_t to = 0; to < d.t; ++to) {
        for (std::int64_t ci = 0; ci < d.ci; ++ci) {
            for (std::int64_t a = 0; a < d.kt; ++a) {
                const std::int64_t ti = to + a * d.dt - d.lot;
                if (ti < 0 || ti >= d.t) continue;
                const double* inplane = in.data() + (ci * d.t + ti) * HW;
                double* dinplane = need_din ? din.data() + (ci * d.t + ti) * HW : nullptr;
                for (std::int64_t b = 0; b < d.kh; ++b) {
                    const std::int64_t oh = b * d.dh - d.loh;
                    for (std::int64_t c = 0; c < d.kw; ++c) {
                        const std::int64_t ow = c * d.dw - d.low;
                        const std::int64_t tap = (a * d.kh + b) * d.kw + c;
                        for (std::int64_t co = 0; co < d.co; ++co) {
                            const double* gplane = gout.data() + (co * d.t + to) * HW;
                            const std::int64_t kidx = (co * d.ci + ci) * ktaps + tap;
                            // d_in(h+oh, w+ow) += k * g(h, w)  <=>  axpy with inverted shift
                            if (need_din)
                                axpy_shifted(dinplane, gplane, kd[static_cast<std::size_t>(kidx)],
                                             d.h, d.w, -oh, -ow);
                            if (need_dk)
                                dk[static_cast<std::size_t>(kidx)] += dot_shifted(gplane, inplane, d.h, d.w, oh, ow);
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv3d(Tape& tape, const Tensor& input, const Tensor& kernel, Dilation3 dilation) {
    const ConvDims d = check_conv(input, kernel, dilation);
    const bool track = input.requires_grad() || kernel.requires_grad();
    Tensor out = Tensor::zeros({d.co, d.t, d.h, d.w});
    if (track) out.set_requires_grad(true);
    const auto in = input.data();
    const auto kd = kernel.data();
    auto o = out.mutable_data();
    const std::int64_t HW = d.h * d.w;
    const std::int64_t ktaps = d.kt * d.kh * d.kw;
    for (std::int64_t to = 0; to < d.t; ++to) {
        for (std::int64_t ci = 0; ci < d.ci; ++ci) {
            for (std::int64_t a = 0; a < d.kt; ++a) {
                const std::int64_t ti = to + a * d.dt - d.lot;
                if (ti < 0 || ti >= d.t) continue;
                const double* inplane = in.data() + (ci * d.t + ti) * HW;
                for (std::int64_t b = 0; b < d.kh; ++b) {
                    const std::int64_t oh = b * d.dh - d.loh;
                    for (std::int64_t c = 0; c < d.kw; ++c) {
                        const std::int64_t ow = c * d.dw - d.low;
                        const std::int64_t tap = (a * d.kh + b) * d.kw + c;
                        for (std::int64_t co = 0; co < d.co; ++co) {
                            const double k = kd[static_cast<std::size_t>((co * d.ci + ci) * ktaps + tap)];
                            axpy_shifted(o.data() + (co * d.t + to) * HW, inplane, k, d.h, d.w, oh, ow);
                        }
                    }
                }
            }
        }
    }
    detail::ensure_finite(out, "conv3d");
    if (track) {
        tape.record({input, kernel}, out, [d](BackwardCtx& ctx) {
            conv3d_backward(d, ctx.input(0), ctx.input(1), ctx);
        });
    }
    return out;
}

Tensor td_effective_kernel(Tape& tape, const Tensor& weights) {
    if (weights.dim() != 5) throw ShapeError("td_conv: weights must be [Co,Ci,l,kh,kw]");
    const std::int64_t co = weights.extent(0), ci = weights.extent(1), l = weights.extent(2);
    const std::int64_t kh = weights.extent(3), kw = weights.extent(4);
    const std::int64_t sp = kh * kw;
    const bool track = weights.requires_grad();
    Tensor out = Tensor::zeros({co, ci, l + 2, kh, kw});
    if (track) out.set_requires_grad(true);
    const auto w = weights.data();
    auto o = out.mutable_data();
    for (std::int64_t p = 0; p < co * ci; ++p) {
        const double* wp = w.data() + p * l * sp;
        double* op = o.data() + p * (l + 2) * sp;
        for (std::int64_t j = 0; j < l + 2; ++j) {
            for (std::int64_t s = 0; s < sp; ++s) {
                double v = 0.0;
                if (j - 1 >= 0 && j - 1 < l) v += 2.0 * wp[(j - 1) * sp + s];
                if (j - 2 >= 0 && j - 2 < l) v -= wp[(j - 2) * sp + s];
                if (j < l) v -= wp[j * sp + s];
                op[j * sp + s] = v;
            }
        }
    }
    detail::ensure_finite(out, "td_effective_kernel");
    if (track) {
        tape.record({weights}, out, [co, ci, l, sp](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gw = ctx.grad_for(0);
            for (std::int64_t p = 0; p < co * ci; ++p) {
                const double* gp = g.data() + p * (l + 2) * sp;
                double* gwp = gw.data() + p * l * sp;
                for (std::int64_t i = 0; i < l; ++i)
                    for (std::int64_t s = 0; s < sp; ++s)
                        gwp[i * sp + s] += 2.0 * gp[(i + 1) * sp + s] - gp[i * sp + s] - gp[(i + 2) * sp + s];
            }
        });
    }
    return out;
}

Tensor td_conv(Tape& tape, const Tensor& input, const Tensor& weights, int time_dilation) {
    Tensor keff = td_effective_kernel(tape, weights);
    return conv3d(tape, input, keff, Dilation3{time_dilation, 1, 1});
}

Tensor sd_effective_kernel(Tape& tape, const Tensor& weights) {
    if (weights.dim() != 5) throw ShapeError("sd_conv: weights must be [Co,Ci,l,k,k]");
    const std::int64_t k = weights.extent(3);
    if (k != weights.extent(4)) throw ShapeError("sd_conv: spatial kernel must be square");
    if (k % 2 == 0) throw ShapeError("sd_conv: spatial kernel size must be odd");
    const std::int64_t co = weights.extent(0), ci = weights.extent(1), l = weights.extent(2);
    const std::int64_t sp = k * k;
    const std::int64_t center = (sp - 1) / 2;
    const bool track = weights.requires_grad();
    Tensor out = Tensor::zeros(weights.shape());
    if (track) out.set_requires_grad(true);
    const auto w = weights.data();
    auto o = out.mutable_data();
    for (std::int64_t p = 0; p < co * ci * l; ++p) {
        const double* wp = w.data() + p * sp;
        double* op = o.data() + p * sp;
        double total = 0.0;
        for (std::int64_t s = 0; s < sp; ++s) total += wp[s];
        for (std::int64_t s = 0; s < sp; ++s) op[s] = s == center ? total : -wp[s];
    }
    detail::ensure_finite(out, "sd_effective_kernel");
    if (track) {
        tape.record({weights}, out, [co, ci, l, sp, center](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gw = ctx.grad_for(0);
            for (std::int64_t p = 0; p < co * ci * l; ++p) {
                const double* gp = g.data() + p * sp;
                double* gwp = gw.data() + p * sp;
                const double gc = gp[center];
                for (std::int64_t s = 0; s < sp; ++s)
                    gwp[s] += s == center ? gc : gc - gp[s];
            }
        });
    }
    return out;
}

Tensor sd_conv(Tape& tape, const Tensor& input, const Tensor& weights, int spatial_dilation) {
    Tensor keff = sd_effective_kernel(tape, weights);
    return conv3d(tape, input, keff, Dilation3{1, spatial_dilation, spatial_dilation});
}

Tensor matmul_time(Tape& tape, const Tensor& features, const Tensor& scorm) {
    if (features.dim() != 4) throw ShapeError("matmul_time: features must be [C,T,H,W]");
    if (scorm.dim() != 2 || scorm.extent(0) != scorm.extent(1))
        throw ShapeError("matmul_time: scorm must be square, got " + shape_str(scorm.shape()));
    const std::int64_t C = features.extent(0), T = features.extent(1);
    const std::int64_t HW = features.extent(2) * features.extent(3);
    if (scorm.extent(0) != T)
        throw ShapeError("matmul_time: scorm side " + std::to_string(scorm.extent(0)) + " != T " + std::to_string(T));
    const bool track = features.requires_grad() || scorm.requires_grad();
    Tensor out = Tensor::zeros(features.shape());
    if (track) out.set_requires_grad(true);
    const auto f = features.data();
    const auto w = scorm.data();
    auto o = out.mutable_data();
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t t = 0; t < T; ++t) {
            const double* fplane = f.data() + (c * T + t) * HW;
            for (std::int64_t u = 0; u < T; ++u) {
                const double k = w[static_cast<std::size_t>(t * T + u)];
                if (k == 0.0) continue;
                double* oplane = o.data() + (c * T + u) * HW;
                for (std::int64_t i = 0; i < HW; ++i) oplane[i] += k * fplane[i];
            }
        }
    }
    detail::ensure_finite(out, "matmul_time");
    if (track) {
        tape.record({features, scorm}, out, [C, T, HW](BackwardCtx& ctx) {
            const auto f = ctx.input(0).data();
            const auto w = ctx.input(1).data();
            const auto g = ctx.out_grad();
            const bool need_df = ctx.needs_grad(0);
            const bool need_dw = ctx.needs_grad(1);
            std::span<double> df = need_df ? ctx.grad_for(0) : std::span<double>{};
            std::span<double> dw = need_dw ? ctx.grad_for(1) : std::span<double>{};
            for (std::int64_t c = 0; c < C; ++c) {
                for (std::int64_t t = 0; t < T; ++t) {
                    const double* fplane = f.data() + (c * T + t) * HW;
                    double* dfplane = need_df ? df.data() + (c * T + t) * HW : nullptr;
                    for (std::int64_t u = 0; u < T; ++u) {
                        const double* gplane = g.data() + (c * T + u) * HW;
                        const double k = w[static_cast<std::size_t>(t * T + u)];
                        double acc = 0.0;
                        if (need_df && need_dw) {
                            for (std::int64_t i = 0; i < HW; ++i) {
                                dfplane[i] += k * gplane[i];
                                acc += fplane[i] * gplane[i];
                            }
                        } else if (need_df) {
                            for (std::int64_t i = 0; i < HW; ++i) dfplane[i] += k * gplane[i];
                        } else {
                            for (std::int64_t i = 0; i < HW; ++i) acc += fplane[i] * gplane[i];
                        }
                        if (need_dw) dw[static_cast<std::size_t>(t * T + u)] += acc;
                    }
                }
            }
        });
    }
    return out;
}

void BnUpdate::apply() const {
    if (!target) return;
    for (std::size_t c = 0; c < batch_mean.size(); ++c) {
        target->running_mean[c] = (1.0 - momentum) * target->running_mean[c] + momentum * batch_mean[c];
        target->running_var[c] = (1.0 - momentum) * target->running_var[c] + momentum * batch_var[c];
    }
}

Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  const BnBuffers& buffers, bool training, std::vector<BnUpdate>* updates,
                  double momentum, double eps) {
    if (x.dim() < 1) throw ShapeError("batch_norm: rank-0 input");
    const std::int64_t C = x.extent(0);
    const std::int64_t inner = x.size() / std::max<std::int64_t>(C, 1);
    if (gamma.size() != C || beta.size() != C)
        throw ShapeError("batch_norm: gamma/beta must have one value per channel");
    if (static_cast<std::int64_t>(buffers.running_mean.size()) != C)
        throw ShapeError("batch_norm: running stats sized for " + std::to_string(buffers.running_mean.size()) +
                         " channels, input has " + std::to_string(C));

    std::vector<double> mean(static_cast<std::size_t>(C)), inv_std(static_cast<std::size_t>(C));
    std::vector<double> var_unbiased(static_cast<std::size_t>(C));
    const auto xd = x.data();
    if (training) {
        for (std::int64_t c = 0; c < C; ++c) {
            const double* p = xd.data() + c * inner;
            double m = 0.0;
            for (std::int64_t i = 0; i < inner; ++i) m += p[i];
            m /= static_cast<double>(inner);
            double v = 0.0;
            for (std::int64_t i = 0; i < inner; ++i) {
                const double d = p[i] - m;
                v += d * d;
            }
            v /= static_cast<double>(inner);
            mean[static_cast<std::size_t>(c)] = m;
            inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(v + eps);
            var_unbiased[static_cast<std::size_t>(c)] =
                inner > 1 ? v * static_cast<double>(inner) / static_cast<double>(inner - 1) : v;
        }
        if (updates) updates->push_back(BnUpdate{const_cast<BnBuffers*>(&buffers), mean, var_unbiased, momentum});
    } else {
        for (std::int64_t c = 0; c < C; ++c) {
            mean[static_cast<std::size_t>(c)] = buffers.running_mean[static_cast<std::size_t>(c)];
            inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(buffers.running_var[static_cast<std::size_t>(c)] + eps);
        }
    }

    const bool track = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    Tensor out = Tensor::zeros(x.shape());
    if (track) out.set_requires_grad(true);
    auto o = out.mutable_data();
    const auto gd = gamma.data();
    const auto bd = beta.data();
    for (std::int64_t c = 0; c < C; ++c) {
        const double m = mean[static_cast<std::size_t>(c)];
        const double is = inv_std[static_cast<std::size_t>(c)];
        const double gmul = gd[static_cast<std::size_t>(c)] * is;
        const double badd = bd[static_cast<std::size_t>(c)];
        const double* p = xd.data() + c * inner;
        double* op = o.data() + c * inner;
        for (std::int64_t i = 0; i < inner; ++i) op[i] = (p[i] - m) * gmul + badd;
    }
    detail::ensure_finite(out, "batch_norm");

    if (track) {
        tape.record({x, gamma, beta}, out,
                    [C, inner, mean, inv_std, training](BackwardCtx& ctx) {
            const auto xd = ctx.input(0).data();
            const auto gd = ctx.input(1).data();
            const auto g = ctx.out_grad();
            const bool need_dx = ctx.needs_grad(0);
            const bool need_dg = ctx.needs_grad(1);
            const bool need_db = ctx.needs_grad(2);
            std::span<double> dx = need_dx ? ctx.grad_for(0) : std::span<double>{};
            std::span<double> dgm = need_dg ? ctx.grad_for(1) : std::span<double>{};
            std::span<double> dbt = need_db ? ctx.grad_for(2) : std::span<double>{};
            for (std::int64_t c = 0; c < C; ++c) {
                const double m = mean[static_cast<std::size_t>(c)];
                const double is = inv_std[static_cast<std::size_t>(c)];
                const double gam = gd[static_cast<std::size_t>(c)];
                const double* p = xd.data() + c * inner;
                const double* gp = g.data() + c * inner;
                double sum_g = 0.0, sum_gx = 0.0;
                for (std::int64_t i = 0; i < inner; ++i) {
                    sum_g += gp[i];
                    sum_gx += gp[i] * (p[i] - m) * is;
                }
                if (need_db) dbt[static_cast<std::size_t>(c)] += sum_g;
                if (need_dg) dgm[static_cast<std::size_t>(c)] += sum_gx;
                if (need_dx) {
                    double* dp = dx.data() + c * inner;
                    if (training) {
                        const double n = static_cast<double>(inner);
                        for (std::int64_t i = 0; i < inner; ++i) {
                            const double xh = (p[i] - m) * is;
                            dp[i] += gam * is * (gp[i] - sum_g / n - xh * sum_gx / n);
                        }
                    } else {
                        for (std::int64_t i = 0; i < inner; ++i) dp[i] += gam * is * gp[i];
                    }
                }
            }
        });
    }
    return out;
}

Tensor add_channel_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
    if (x.dim() < 1) throw ShapeError("add_channel_bias: rank-0 input");
    const std::int64_t C = x.extent(0);
    if (bias.size() != C) throw ShapeError("add_channel_bias: bias must have one value per channel");
    const std::int64_t inner = x.size() / std::max<std::int64_t>(C, 1);
    const bool track = x.requires_grad() || bias.requires_grad();
    Tensor out = Tensor::zeros(x.shape());
    if (track) out.set_requires_grad(true);
    const auto xd = x.data();
    const auto bd = bias.data();
    auto o = out.mutable_data();
    for (std::int64_t c = 0; c < C; ++c) {
        const double b = bd[static_cast<std::size_t>(c)];
        for (std::int64_t i = 0; i < inner; ++i)
            o[static_cast<std::size_t>(c * inner + i)] = xd[static_cast<std::size_t>(c * inner + i)] + b;
    }
    detail::ensure_finite(out, "add_channel_bias");
    if (track) {
        tape.record({x, bias}, out, [C, inner](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            if (ctx.needs_grad(0)) {
                auto gi = ctx.grad_for(0);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
            }
            if (ctx.needs_grad(1)) {
                auto gb = ctx.grad_for(1);
                for (std::int64_t c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < inner; ++i) acc += g[static_cast<std::size_t>(c * inner + i)];
                    gb[static_cast<std::size_t>(c)] += acc;
                }
            }
        });
    }
    return out;
}

Tensor max_pool2d(Tape& tape, const Tensor& x) {
    if (x.dim() != 4) throw ShapeError("max_pool2d: input must be [C,T,H,W]");
    const std::int64_t C = x.extent(0), T = x.extent(1), H = x.extent(2), W = x.extent(3);
    if (H % 2 != 0 || W % 2 != 0)
        throw ShapeError("max_pool2d: spatial dims must be even, got " + shape_str(x.shape()));
    const std::int64_t Ho = H / 2, Wo = W / 2;
    const bool track = x.requires_grad();
    Tensor out = Tensor::zeros({C, T, Ho, Wo});
    if (track) out.set_requires_grad(true);
    const auto xd = x.data();
    auto o = out.mutable_data();
    std::vector<std::int64_t> argmax;
    if (track) argmax.resize(static_cast<std::size_t>(out.size()));
    std::int64_t oi = 0;
    for (std::int64_t ct = 0; ct < C * T; ++ct) {
        const double* plane = xd.data() + ct * H * W;
        for (std::int64_t h = 0; h < Ho; ++h) {
            for (std::int64_t w = 0; w < Wo; ++w, ++oi) {
                std::int64_t best = (2 * h) * W + 2 * w;
                double bv = plane[best];
                // Row-major scan of the 2x2 cell; strict > keeps the first max.
                const std::int64_t cand[3] = {best + 1, best + W, best + W + 1};
                for (std::int64_t k : cand) {
                    if (plane[k] > bv) {
                        bv = plane[k];
                        best = k;
                    }
                }
                o[static_cast<std::size_t>(oi)] = bv;
                if (track) argmax[static_cast<std::size_t>(oi)] = ct * H * W + best;
            }
        }
    }
    detail::ensure_finite(out, "max_pool2d");
    if (track) {
        tape.record({x}, out, [argmax = std::move(argmax)](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < g.size(); ++i) gi[static_cast<std::size_t>(argmax[i])] += g[i];
        });
    }
    return out;
}

Tensor upsample_nearest2d(Tape& tape, const Tensor& x, int factor) {
    if (x.dim() != 4) throw ShapeError("upsample_nearest2d: input must be [C,T,H,W]");
    if (factor < 1) throw ShapeError("upsample_nearest2d: factor must be >= 1");
    const std::int64_t C = x.extent(0), T = x.extent(1), H = x.extent(2), W = x.extent(3);
    const std::int64_t f = factor, Ho = H * f, Wo = W * f;
    const bool track = x.requires_grad();
    Tensor out = Tensor::zeros({C, T, Ho, Wo});
    if (track) out.set_requires_grad(true);
    const auto xd = x.data();
    auto o = out.mutable_data();
    for (std::int64_t ct = 0; ct < C * T; ++ct) {
        const double* src = xd.data() + ct * H * W;
        double* dst = o.data() + ct * Ho * Wo;
        for (std::int64_t h = 0; h < Ho; ++h) {
            const double* srow = src + (h / f) * W;
            double* drow = dst + h * Wo;
            for (std::int64_t w = 0; w < Wo; ++w) drow[w] = srow[w / f];
        }
    }
    detail::ensure_finite(out, "upsample_nearest2d");
    if (track) {
        tape.record({x}, out, [C, T, H, W, f](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gi = ctx.grad_for(0);
            const std::int64_t Ho = H * f, Wo = W * f;
            for (std::int64_t ct = 0; ct < C * T; ++ct) {
                double* dsrc = gi.data() + ct * H * W;
                const double* gp = g.data() + ct * Ho * Wo;
                for (std::int64_t h = 0; h < Ho; ++h) {
                    double* drow = dsrc + (h / f) * W;
                    const double* grow = gp + h * Wo;
                    for (std::int64_t w = 0; w < Wo; ++w) drow[w / f] += grow[w];
                }
            }
        });
    }
    return out;
}

}  // namespace tempro
