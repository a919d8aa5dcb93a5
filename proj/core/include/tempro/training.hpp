#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tempro/network.hpp"
#include "tempro/simulator.hpp"

namespace tempro::train {

struct TrainConfig {
    int epochs = 32;
    int batch_size = 4;
    double lr = 1e-3;
    double lr_decay = 0.7;      // applied every lr_decay_epochs
    int lr_decay_epochs = 10;
    std::int64_t crop = 128;    // spatial patch side
    double presence = 0.75;     // minimum fraction of target-bearing samples
    std::uint64_t seed = 0;

    void validate() const;
    double lr_at_epoch(int epoch) const;
};

/// Adam with bias correction; beta1 0.9, beta2 0.999, eps 1e-8.
class Adam {
 public:
    explicit Adam(net::Model& model, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    /// Applies one update from the gradients currently on the parameters.
    /// Parameters without gradients (or with zero gradients) stay unchanged.
    void step(double lr);
    std::int64_t step_count() const { return steps_; }

 private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    std::int64_t steps_ = 0;
};

/// 1 - (sum(p*m)+eps) / (sum(p)+sum(m)-sum(p*m)+eps) with p = sigmoid(logits).
Tensor soft_iou_loss(Tape& tape, const Tensor& logits, const Tensor& mask, double eps = 1e-6);

struct CropSample {
    Tensor input;  // [T,crop,crop]
    Tensor mask;   // [T,crop,crop]
    bool has_target = false;
};

/// Random temporal window (zero-filled to T past the sequence end) and random
/// spatial crop. A presence-biased coin decides whether the crop is rejection-
/// sampled to contain at least one mask pixel.
CropSample sample_crop(const sim::Sequence& seq, std::int64_t T, std::int64_t crop, double presence,
                       std::mt19937_64& rng);

struct TrainLogRow {
    int epoch;
    int step;
    double loss;
    double lr;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    double final_loss = 0.0;
};

/// Full training loop over the given sequences. Deterministic under
/// cfg.seed; batch samples run in parallel workers with gradients reduced in
/// sample order. Throws NumericError if the loss goes non-finite.
TrainResult train(net::Model& model, const std::vector<sim::Sequence>& dataset, const TrainConfig& cfg);

std::string train_log_csv(const std::vector<TrainLogRow>& log);

/// One inference window of the overlap tiling.
struct TileWindow {
    std::int64_t scheduled_start;  // 1-indexed start from the repetition-rate arithmetic
    std::int64_t start;            // 1-indexed start actually used (tail right-aligned)
    std::int64_t frames;           // real frames covered (= T unless L < T)
};

/// Window starts at 1, (1-overlap)T+1, 2(1-overlap)T+1, ...; a window that
/// would run past the end is right-aligned to cover the tail.
std::vector<TileWindow> plan_tiling(std::int64_t L, std::int64_t T, double overlap);

struct Detection {
    Tensor confidence;  // [L,H,W]
    Tensor mask;        // [L,H,W] in {0,1}
};

/// Tiled eval-mode inference over a sequence of any length L >= 1.
/// Overlapping frame confidences combine by max; the mask thresholds the
/// stitched confidences at `threshold` (strict >).
Detection detect_sequence(const net::Model& model, const Tensor& frames, double overlap = 0.10,
                          double threshold = 0.5);

}  // namespace tempro::train
