#include "tempro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace tempro::metrics {

std::vector<Component> connected_components(std::span<const double> frame, std::int64_t H, std::int64_t W) {
    std::vector<Component> comps;
    std::vector<std::int8_t> seen(static_cast<std::size_t>(H * W), 0);
    std::vector<std::int64_t> stack;
    for (std::int64_t start = 0; start < H * W; ++start) {
        if (frame[static_cast<std::size_t>(start)] == 0.0 || seen[static_cast<std::size_t>(start)]) continue;
        Component comp;
        stack.assign(1, start);
        seen[static_cast<std::size_t>(start)] = 1;
        while (!stack.empty()) {
            const std::int64_t p = stack.back();
            stack.pop_back();
            comp.pixels.push_back(p);
            const std::int64_t y = p / W, x = p % W;
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    if (dy == 0 && dx == 0) continue;
                    const std::int64_t ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                    const std::int64_t np = ny * W + nx;
                    if (frame[static_cast<std::size_t>(np)] == 0.0 || seen[static_cast<std::size_t>(np)]) continue;
                    seen[static_cast<std::size_t>(np)] = 1;
                    stack.push_back(np);
                }
            }
        }
        double sx = 0.0, sy = 0.0;
        for (std::int64_t p : comp.pixels) {
            sy += static_cast<double>(p / W);
            sx += static_cast<double>(p % W);
        }
        comp.cx = sx / static_cast<double>(comp.pixels.size());
        comp.cy = sy / static_cast<double>(comp.pixels.size());
        comps.push_back(std::move(comp));
    }
    return comps;
}

FrameMatch match_targets(const std::vector<Component>& pred, const std::vector<Component>& gt,
                         const MatchParams& params) {
    FrameMatch m;
    m.gt_hit.assign(gt.size(), false);
    m.pred_match.assign(pred.size(), -1);

    // Edges where the predicted centroid is within the radius of the GT one.
    std::vector<std::vector<int>> adj(pred.size());
    for (std::size_t p = 0; p < pred.size(); ++p) {
        for (std::size_t g = 0; g < gt.size(); ++g) {
            const double dx = pred[p].cx - gt[g].cx;
            const double dy = pred[p].cy - gt[g].cy;
            if (std::sqrt(dx * dx + dy * dy) <= params.radius) adj[p].push_back(static_cast<int>(g));
        }
    }
    // Maximum bipartite matching via augmenting paths.
    std::vector<int> gt_owner(gt.size(), -1);
    std::function<bool(std::size_t, std::vector<bool>&)> try_match = [&](std::size_t p, std::vector<bool>& used) {
        for (int g : adj[p]) {
            if (used[static_cast<std::size_t>(g)]) continue;
            used[static_cast<std::size_t>(g)] = true;
            if (gt_owner[static_cast<std::size_t>(g)] < 0 ||
                try_match(static_cast<std::size_t>(gt_owner[static_cast<std::size_t>(g)]), used)) {
                gt_owner[static_cast<std::size_t>(g)] = static_cast<int>(p);
                return true;
            }
        }
        return false;
    };
    for (std::size_t p = 0; p < pred.size(); ++p) {
        std::vector<bool> used(gt.size(), false);
        try_match(p, used);
    }
    for (std::size_t g = 0; g < gt.size(); ++g) {
        if (gt_owner[g] >= 0) {
            m.gt_hit[g] = true;
            m.pred_match[static_cast<std::size_t>(gt_owner[g])] = static_cast<int>(g);
        }
    }
    return m;
}

namespace {

void accumulate_pd_fa(std::span<const double> pred, std::span<const double> gt, std::int64_t H, std::int64_t W,
                      const MatchParams& params, PdFa& acc) {
    const auto pred_comps = connected_components(pred, H, W);
    const auto gt_comps = connected_components(gt, H, W);
    const FrameMatch match = match_targets(pred_comps, gt_comps, params);

    acc.total_targets += static_cast<std::int64_t>(gt_comps.size());
    for (bool hit : match.gt_hit) acc.detected += hit ? 1 : 0;

    // Shield = matched GT components dilated by the matching radius.
    std::vector<std::int8_t> shield(static_cast<std::size_t>(H * W), 0);
    const std::int64_t r = static_cast<std::int64_t>(std::ceil(params.radius));
    for (std::size_t g = 0; g < gt_comps.size(); ++g) {
        if (!match.gt_hit[g]) continue;
        for (std::int64_t p : gt_comps[g].pixels) {
            const std::int64_t y = p / W, x = p % W;
            for (std::int64_t dy = -r; dy <= r; ++dy) {
                for (std::int64_t dx = -r; dx <= r; ++dx) {
                    if (static_cast<double>(dx * dx + dy * dy) > params.radius * params.radius) continue;
                    const std::int64_t ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                    shield[static_cast<std::size_t>(ny * W + nx)] = 1;
                }
            }
        }
    }
    for (std::int64_t i = 0; i < H * W; ++i)
        if (pred[static_cast<std::size_t>(i)] != 0.0 && !shield[static_cast<std::size_t>(i)]) ++acc.false_pixels;
    acc.total_pixels += H * W;
}

}  // namespace

PdFa pd_fa(const Tensor& pred_mask, const Tensor& gt_mask, const MatchParams& params) {
    detail::ensure_same_shape(pred_mask, gt_mask, "pd_fa");
    if (pred_mask.dim() != 3) throw ShapeError("pd_fa: masks must be [T,H,W]");
    const std::int64_t T = pred_mask.extent(0), H = pred_mask.extent(1), W = pred_mask.extent(2);
    const auto pd = pred_mask.data();
    const auto gd = gt_mask.data();
    PdFa acc;
    for (std::int64_t t = 0; t < T; ++t) {
        accumulate_pd_fa(pd.subspan(static_cast<std::size_t>(t * H * W), static_cast<std::size_t>(H * W)),
                         gd.subspan(static_cast<std::size_t>(t * H * W), static_cast<std::size_t>(H * W)),
                         H, W, params, acc);
    }
    acc.pd = acc.total_targets > 0 ? static_cast<double>(acc.detected) / static_cast<double>(acc.total_targets)
                                   : std::nan("");
    acc.fa = acc.total_pixels > 0 ? static_cast<double>(acc.false_pixels) / static_cast<double>(acc.total_pixels) : 0.0;
    return acc;
}

DetectionReport roc_auc(const Tensor& confidence, const Tensor& gt_mask, int n_thresholds,
                        double operating_threshold, const MatchParams& params) {
    detail::ensure_same_shape(confidence, gt_mask, "roc_auc");
    if (n_thresholds < 1) throw ShapeError("roc_auc: n_thresholds must be >= 1");
    const auto conf = confidence.data();
    const auto gt = gt_mask.data();

    std::int64_t gt_pixels = 0;
    for (double v : gt) gt_pixels += v != 0.0 ? 1 : 0;
    const std::int64_t total = static_cast<std::int64_t>(gt.size());
    const std::int64_t bg_pixels = total - gt_pixels;

    std::vector<double> uniq(conf.begin(), conf.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<double> thresholds;
    if (static_cast<int>(uniq.size()) <= n_thresholds) {
        thresholds = uniq;
    } else {
        thresholds.reserve(static_cast<std::size_t>(n_thresholds));
        for (int i = 0; i < n_thresholds; ++i) {
            const std::size_t idx = static_cast<std::size_t>(
                static_cast<double>(i) * static_cast<double>(uniq.size() - 1) / (n_thresholds - 1));
            thresholds.push_back(uniq[idx]);
        }
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    }

    DetectionReport report;
    // Descending thresholds: pixel tp/fp rates grow monotonically.
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
        const double th = *it;
        std::int64_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < conf.size(); ++i) {
            if (conf[i] >= th) {
                if (gt[i] != 0.0) ++tp;
                else ++fp;
            }
        }
        RocPoint pt;
        pt.threshold = th;
        pt.pd = gt_pixels > 0 ? static_cast<double>(tp) / static_cast<double>(gt_pixels) : 0.0;
        pt.fa = total > 0 ? static_cast<double>(fp) / static_cast<double>(total) : 0.0;
        report.roc.push_back(pt);
    }
    // Endpoints: (0, pd at the strictest threshold) and (1, 1).
    const double pd_at_max = report.roc.empty() ? 0.0 : report.roc.front().pd;
    report.roc.insert(report.roc.begin(), RocPoint{std::nan(""), 0.0, pd_at_max});
    report.roc.push_back(RocPoint{std::nan(""), 1.0, 1.0});

    double auc = 0.0;
    for (std::size_t i = 1; i < report.roc.size(); ++i) {
        const auto& a = report.roc[i - 1];
        const auto& b = report.roc[i];
        auc += (b.fa - a.fa) * 0.5 * (a.pd + b.pd);
    }
    report.auc = auc;
    (void)bg_pixels;

    // Operating point: instance Pd / pixel Fa at the stated threshold.
    Tensor pred = Tensor::zeros(confidence.shape());
    auto pm = pred.mutable_data();
    for (std::size_t i = 0; i < conf.size(); ++i) pm[i] = conf[i] > operating_threshold ? 1.0 : 0.0;
    Tensor pred3 = pred, gt3 = gt_mask;
    if (confidence.dim() == 2) {
        Tape tape;
        pred3 = reshape(tape, pred, {1, confidence.extent(0), confidence.extent(1)});
        gt3 = reshape(tape, gt_mask, {1, confidence.extent(0), confidence.extent(1)});
    }
    const PdFa op = pd_fa(pred3, gt3, params);
    report.pd = op.pd;
    report.fa = op.fa;
    report.detected = op.detected;
    report.total_targets = op.total_targets;
    report.false_pixels = op.false_pixels;
    report.total_pixels = op.total_pixels;
    return report;
}

std::string roc_csv(const std::vector<RocPoint>& roc) {
    std::ostringstream os;
    os << "threshold,fa,pd\n";
    for (const auto& p : roc) os << p.threshold << ',' << p.fa << ',' << p.pd << '\n';
    return os.str();
}

}  // namespace tempro::metrics
