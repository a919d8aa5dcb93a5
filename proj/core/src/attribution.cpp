#include "tempro/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tempro/threading.hpp"

namespace tempro::attr {

void AttributionConfig::validate() const {
    if (steps < 1) throw ShapeError("AttributionConfig: steps must be >= 1");
    if (!target_mask.defined()) throw ShapeError("AttributionConfig: target mask required");
    bool any = false;
    for (double v : target_mask.data()) {
        if (v != 0.0 && v != 1.0) throw ShapeError("AttributionConfig: mask must be binary");
        any = any || v != 0.0;
    }
    if (!any) throw ShapeError("AttributionConfig: mask is empty");
}

double converter(const Tensor& confidence, const Tensor& mask) {
    detail::ensure_same_shape(confidence, mask, "converter");
    bool any = false;
    double acc = 0.0;
    const auto c = confidence.data();
    const auto m = mask.data();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (m[i] != 0.0) {
            acc += c[i];
            any = true;
        }
    }
    if (!any) throw ShapeError("converter: mask is empty");
    return acc;
}

namespace {

/// converter(sigmoid(model(x))) with gradients flowing to x only.
double scored_forward(const net::Model& model, const Tensor& x, const Tensor& mask, Tape& tape,
                      Tensor* grad_source) {
    Tensor logits = net::forward(tape, const_cast<net::Model&>(model), x, /*training=*/false, nullptr);
    Tensor conf = sigmoid(tape, logits);
    Tensor scored = mul(tape, conf, mask);
    Tensor s = sum(tape, scored);
    if (grad_source) {
        tape.backward(s);
        *grad_source = x;
    }
    return s.value();
}

}  // namespace

AttributionMap integrated_gradients(net::Model& model, const Tensor& s, const AttributionConfig& cfg) {
    cfg.validate();
    if (s.dim() != 3) throw ShapeError("integrated_gradients: input must be [T,H,W]");
    if (cfg.target_mask.shape() != s.shape())
        throw ShapeError("integrated_gradients: mask shape must match the input");

    net::ParamGradGuard guard(model);  // gradients flow to the input only

    const std::size_t n = static_cast<std::size_t>(s.size());
    const auto sd = s.data();
    std::vector<double> delta(n);
    for (std::size_t i = 0; i < n; ++i) delta[i] = sd[i] - cfg.baseline_value;

    // Endpoint predictions for the completeness audit.
    double pred_s, pred_base;
    {
        Tape tape;
        pred_s = scored_forward(model, s.clone(), cfg.target_mask, tape, nullptr);
    }
    {
        Tape tape;
        Tensor base = Tensor::full(s.shape(), cfg.baseline_value);
        pred_base = scored_forward(model, base, cfg.target_mask, tape, nullptr);
    }

    // Midpoint Riemann sum over the straight-line path; each step is an
    // independent forward/backward pass, reduced in step order.
    std::vector<std::vector<double>> step_grads(static_cast<std::size_t>(cfg.steps));
    parallel_for(cfg.steps, [&](std::int64_t k) {
        const double alpha = (static_cast<double>(k) + 0.5) / static_cast<double>(cfg.steps);
        Tensor x = Tensor::zeros(s.shape());
        auto xd = x.mutable_data();
        for (std::size_t i = 0; i < n; ++i) xd[i] = cfg.baseline_value + alpha * delta[i];
        x.set_requires_grad(true);
        Tape tape;
        Tensor src;
        scored_forward(model, x, cfg.target_mask, tape, &src);
        const auto g = src.grad();
        step_grads[static_cast<std::size_t>(k)].assign(g.begin(), g.end());
    });

    AttributionMap map;
    map.values = Tensor::zeros(s.shape());
    auto vd = map.values.mutable_data();
    for (std::size_t k = 0; k < step_grads.size(); ++k)
        for (std::size_t i = 0; i < n; ++i) vd[i] += step_grads[k][i];
    const double inv_steps = 1.0 / static_cast<double>(cfg.steps);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vd[i] *= inv_steps * delta[i];
        total += vd[i];
    }
    map.prediction = pred_s;
    map.baseline_prediction = pred_base;
    map.completeness_gap = std::abs(total - (pred_s - pred_base));
    return map;
}

FrameInfluence frame_influence(const AttributionMap& map) {
    const std::int64_t T = map.values.extent(0);
    const std::int64_t HW = map.values.extent(1) * map.values.extent(2);
    FrameInfluence fi;
    fi.sum_abs.resize(static_cast<std::size_t>(T));
    fi.mean_abs.resize(static_cast<std::size_t>(T));
    fi.max_abs.resize(static_cast<std::size_t>(T));
    const auto v = map.values.data();
    for (std::int64_t t = 0; t < T; ++t) {
        double s = 0.0, mx = 0.0;
        for (std::int64_t i = 0; i < HW; ++i) {
            const double a = std::abs(v[static_cast<std::size_t>(t * HW + i)]);
            s += a;
            mx = std::max(mx, a);
        }
        fi.sum_abs[static_cast<std::size_t>(t)] = s;
        fi.mean_abs[static_cast<std::size_t>(t)] = s / static_cast<double>(HW);
        fi.max_abs[static_cast<std::size_t>(t)] = mx;
    }
    return fi;
}

std::string frame_influence_csv(const FrameInfluence& fi) {
    std::ostringstream os;
    os << "t,mean_abs,max_abs\n";
    for (std::size_t t = 0; t < fi.mean_abs.size(); ++t)
        os << t << ',' << fi.mean_abs[t] << ',' << fi.max_abs[t] << '\n';
    return os.str();
}

SpatialConcentration spatial_concentration(const AttributionMap& map, double cx, double cy, double fraction) {
    const std::int64_t T = map.values.extent(0), H = map.values.extent(1), W = map.values.extent(2);
    const auto v = map.values.data();
    // Column mass |a| summed over time, keyed by distance to (cx, cy).
    std::vector<std::pair<double, double>> by_dist;  // (distance, mass)
    by_dist.reserve(static_cast<std::size_t>(H * W));
    double total = 0.0;
    for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
            double mass = 0.0;
            for (std::int64_t t = 0; t < T; ++t)
                mass += std::abs(v[static_cast<std::size_t>((t * H + y) * W + x)]);
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            by_dist.emplace_back(std::sqrt(dx * dx + dy * dy), mass);
            total += mass;
        }
    }
    SpatialConcentration out;
    if (total <= 0.0) {
        out.degenerate = true;
        return out;
    }
    std::sort(by_dist.begin(), by_dist.end());
    double acc = 0.0;
    for (const auto& [dist, mass] : by_dist) {
        acc += mass;
        if (acc >= fraction * total) {
            out.r90 = dist;
            break;
        }
    }
    return out;
}

}  // namespace tempro::attr
