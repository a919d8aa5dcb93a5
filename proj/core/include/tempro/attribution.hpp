#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tempro/network.hpp"
#include "tempro/tensor.hpp"

namespace tempro::attr {

struct AttributionConfig {
    double baseline_value = 0.0;  // constant baseline gray level
    int steps = 64;               // path subdivisions (midpoint rule)
    Tensor target_mask;           // M_k, binary, same shape as the confidence map

    void validate() const;
};

struct AttributionMap {
    Tensor values;                 // [T,H,W]
    double completeness_gap = 0.0; // |sum(values) - (C(D(S)) - C(D(S')))|
    double prediction = 0.0;       // C(D(S))
    double baseline_prediction = 0.0;
};

/// Sum of the confidence map over the binary target mask (the scalar
/// "converter" that turns a dense prediction into one target's score).
double converter(const Tensor& confidence, const Tensor& mask);

/// Integrated gradients of converter(sigmoid(model(S))) along the straight
/// line from the constant baseline to S, midpoint Riemann sum with cfg.steps
/// forward/backward passes. Deterministic; path steps may run in parallel.
AttributionMap integrated_gradients(net::Model& model, const Tensor& s, const AttributionConfig& cfg);

struct FrameInfluence {
    std::vector<double> sum_abs;   // per frame, sum over pixels of |a|
    std::vector<double> mean_abs;  // sum_abs / (H*W)
    std::vector<double> max_abs;
};

FrameInfluence frame_influence(const AttributionMap& map);
std::string frame_influence_csv(const FrameInfluence& fi);

struct SpatialConcentration {
    double r90 = 0.0;   // smallest radius around (x,y) holding 90% of sum|a|
    bool degenerate = false;  // map had zero mass
};

SpatialConcentration spatial_concentration(const AttributionMap& map, double cx, double cy,
                                           double fraction = 0.9);

}  // namespace tempro::attr
