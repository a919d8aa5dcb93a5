#pragma once

#include <vector>

#include "tempro/tensor.hpp"

namespace tempro {

struct Dilation3 {
    int t = 1;
    int h = 1;
    int w = 1;
};

/// Size-preserving zero-padded cross-correlation.
/// input [C_in,T,H,W], kernel [C_out,C_in,kt,kh,kw] -> [C_out,T,H,W].
Tensor conv3d(Tape& tape, const Tensor& input, const Tensor& kernel, Dilation3 dilation = {});

/// Temporal difference convolution. `weights` [C_out,C_in,l,kh,kw] holds the
/// raw taps w_t; the op convolves with the second-difference reweighting
/// (2w_t - w_{t-1} - w_{t+1}, zero-extended), which spans l+2 time taps.
/// Temporal dilation applies to the tap grid; spatial taps are undilated.
Tensor td_conv(Tape& tape, const Tensor& input, const Tensor& weights, int time_dilation = 1);

/// Exposes the reweighted kernel used by td_conv (l -> l+2 time taps).
Tensor td_effective_kernel(Tape& tape, const Tensor& weights);

/// Spatial (center-pixel) difference convolution. `weights` [C_out,C_in,l,k,k]
/// with odd k; the op convolves with the kernel whose center tap is the sum of
/// all spatial taps and whose off-center taps are negated. `spatial_dilation`
/// applies to the k x k grid; time taps are undilated.
Tensor sd_conv(Tape& tape, const Tensor& input, const Tensor& weights, int spatial_dilation = 1);

/// Exposes the reweighted kernel used by sd_conv (same shape as weights).
Tensor sd_effective_kernel(Tape& tape, const Tensor& weights);

/// Per-pixel temporal transform: for every (c,x,y) the length-T profile is
/// multiplied (as a row vector) by scorm [T,T].
/// features [C,T,H,W] -> [C,T,H,W].
Tensor matmul_time(Tape& tape, const Tensor& features, const Tensor& scorm);

/// Running statistics owned by a batch-norm layer (buffers, not parameters).
struct BnBuffers {
    std::vector<double> running_mean;
    std::vector<double> running_var;

    explicit BnBuffers(std::int64_t channels = 0)
        : running_mean(static_cast<std::size_t>(channels), 0.0),
          running_var(static_cast<std::size_t>(channels), 1.0) {}
};

/// Deferred running-statistics update, applied by the caller in a fixed order
/// so that concurrent forward passes stay deterministic.
struct BnUpdate {
    BnBuffers* target = nullptr;
    std::vector<double> batch_mean;
    std::vector<double> batch_var;  // unbiased, for the running estimate
    double momentum = 0.1;

    void apply() const;
};

/// Channel-first batch normalization over all trailing dims of x [C,...].
/// Training mode normalizes with the current batch statistics and, when
/// `updates` is non-null, appends the running-stat update instead of mutating
/// `buffers` in place. Eval mode normalizes with `buffers`.
Tensor batch_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  const BnBuffers& buffers, bool training, std::vector<BnUpdate>* updates,
                  double momentum = 0.1, double eps = 1e-5);

/// x[C,...] + bias[C] broadcast over trailing dims.
Tensor add_channel_bias(Tape& tape, const Tensor& x, const Tensor& bias);

/// 2x2 stride-2 max pooling over the two trailing (spatial) dims of [C,T,H,W].
/// Gradient routes to the first maximal element in row-major order.
Tensor max_pool2d(Tape& tape, const Tensor& x);

/// Nearest-neighbor upsampling of the two trailing dims by an integer factor.
Tensor upsample_nearest2d(Tape& tape, const Tensor& x, int factor = 2);

}  // namespace tempro
