#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tempro/tensor.hpp"

namespace tempro::metrics {

/// Connected component of a binary frame (8-connectivity).
struct Component {
    std::vector<std::int64_t> pixels;  // flat y*W+x indices
    double cx = 0.0, cy = 0.0;         // centroid
};

std::vector<Component> connected_components(std::span<const double> frame, std::int64_t H, std::int64_t W);

struct MatchParams {
    double radius = 3.0;  // centroid match distance in pixels
};

/// Per-frame instance matching: a ground-truth component counts detected when
/// some predicted component's centroid lies within `radius` of its centroid;
/// each predicted component matches at most one ground truth (maximum
/// bipartite matching on the radius graph).
struct FrameMatch {
    std::vector<bool> gt_hit;          // per GT component
    std::vector<int> pred_match;       // per pred component: GT index or -1
};
FrameMatch match_targets(const std::vector<Component>& pred, const std::vector<Component>& gt,
                         const MatchParams& params = {});

struct PdFa {
    double pd = 0.0;                 // NaN when no GT instances exist
    double fa = 0.0;                 // false pixels / total pixels
    std::int64_t detected = 0;
    std::int64_t total_targets = 0;
    std::int64_t false_pixels = 0;
    std::int64_t total_pixels = 0;
};

/// Instance Pd and pixel Fa over [T,H,W] masks. False pixels are predicted
/// positives outside the dilation (disk of `radius`) of matched GT components.
PdFa pd_fa(const Tensor& pred_mask, const Tensor& gt_mask, const MatchParams& params = {});

struct RocPoint {
    double threshold;
    double fa;
    double pd;
};

struct DetectionReport {
    double pd = 0.0;   // instance-level, at the operating threshold
    double fa = 0.0;   // pixel-level, at the operating threshold
    double auc = 0.0;  // area under the pixel-level ROC
    std::vector<RocPoint> roc;
    std::int64_t detected = 0;
    std::int64_t total_targets = 0;
    std::int64_t false_pixels = 0;
    std::int64_t total_pixels = 0;
    std::string conventions =
        "pd: instance detection with centroid matching (radius 3 px, 8-connectivity); "
        "fa: false pixels / total pixels; roc/auc: pixel-level rates swept over "
        "confidence quantiles";
};

/// Pixel-level ROC/AUC: thresholds swept over the sorted unique confidence
/// quantiles (up to n_thresholds, prediction = confidence >= threshold),
/// with endpoints (0, pd@max) and (1,1) appended; AUC by trapezoid over
/// fa-sorted points.
DetectionReport roc_auc(const Tensor& confidence, const Tensor& gt_mask, int n_thresholds = 256,
                        double operating_threshold = 0.5, const MatchParams& params = {});

std::string roc_csv(const std::vector<RocPoint>& roc);

}  // namespace tempro::metrics
