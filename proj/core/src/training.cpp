#include "tempro/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tempro::train {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw ShapeError("TrainConfig: epochs and batch_size must be >= 1");
    if (lr <= 0.0) throw ShapeError("TrainConfig: lr must be positive");
    if (lr_decay <= 0.0 || lr_decay > 1.0) throw ShapeError("TrainConfig: lr_decay must be in (0,1]");
    if (lr_decay_epochs < 1) throw ShapeError("TrainConfig: lr_decay_epochs must be >= 1");
    if (crop < 1) throw ShapeError("TrainConfig: crop must be >= 1");
    if (presence < 0.0 || presence > 1.0) throw ShapeError("TrainConfig: presence must be in [0,1]");
}

double TrainConfig::lr_at_epoch(int epoch) const {
    return lr * std::pow(lr_decay, epoch / lr_decay_epochs);
}

Adam::Adam(net::Model& model, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    model.visit_params([&](const std::string&, Tensor& t) { params_.push_back(t); });
    for (const Tensor& p : params_) {
        m_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
        v_.emplace_back(static_cast<std::size_t>(p.size()), 0.0);
    }
}

void Adam::step(double lr) {
    ++steps_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        auto d = p.mutable_data();
        const bool has = p.has_grad();
        const std::span<const double> g = has ? p.grad() : std::span<const double>{};
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double gi = has ? g[i] : 0.0;
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            d[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            if (!std::isfinite(d[i])) throw NumericError("Adam: parameter went non-finite");
        }
    }
}

Tensor soft_iou_loss(Tape& tape, const Tensor& logits, const Tensor& mask, double eps) {
    detail::ensure_same_shape(logits, mask, "soft_iou_loss");
    for (double v : mask.data())
        if (v != 0.0 && v != 1.0) throw ShapeError("soft_iou_loss: mask must be binary");
    Tensor p = sigmoid(tape, logits);
    Tensor inter = sum(tape, mul(tape, p, mask));
    Tensor psum = sum(tape, p);
    Tensor msum = sum(tape, mask);
    Tensor uni = sub(tape, add(tape, psum, msum), inter);
    Tensor ratio = div(tape, add_const(tape, inter, eps), add_const(tape, uni, eps));
    return add_const(tape, scale(tape, ratio, -1.0), 1.0);
}

namespace {

bool crop_has_target(const sim::Sequence& seq, std::int64_t t0, std::int64_t y0, std::int64_t x0,
                     std::int64_t T, std::int64_t crop) {
    if (!seq.has_mask()) return false;
    const std::int64_t L = seq.frames_count(), H = seq.height(), W = seq.width();
    const auto m = seq.masks.data();
    const std::int64_t t1 = std::min<std::int64_t>(L, t0 + T);
    for (std::int64_t t = t0; t < t1; ++t)
        for (std::int64_t y = y0; y < y0 + crop; ++y)
            for (std::int64_t x = x0; x < x0 + crop; ++x)
                if (m[static_cast<std::size_t>((t * H + y) * W + x)] != 0.0) return true;
    return false;
}

}  // namespace

CropSample sample_crop(const sim::Sequence& seq, std::int64_t T, std::int64_t crop, double presence,
                       std::mt19937_64& rng) {
    const std::int64_t L = seq.frames_count(), H = seq.height(), W = seq.width();
    if (crop > H || crop > W)
        throw ShapeError("sample_crop: crop " + std::to_string(crop) + " larger than frame " + shape_str(seq.frames.shape()));

    std::uniform_int_distribution<std::int64_t> ut(0, L - 1);
    std::uniform_int_distribution<std::int64_t> uy(0, H - crop);
    std::uniform_int_distribution<std::int64_t> ux(0, W - crop);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const bool want_target = seq.has_mask() && u01(rng) < presence;
    std::int64_t t0 = ut(rng), y0 = uy(rng), x0 = ux(rng);
    if (want_target && !crop_has_target(seq, t0, y0, x0, T, crop)) {
        bool found = false;
        for (int attempt = 0; attempt < 64 && !found; ++attempt) {
            t0 = ut(rng);
            y0 = uy(rng);
            x0 = ux(rng);
            found = crop_has_target(seq, t0, y0, x0, T, crop);
        }
        if (!found) {
            // Center the crop on some mask pixel directly.
            const auto m = seq.masks.data();
            std::vector<std::int64_t> hits;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(m.size()); ++i)
                if (m[static_cast<std::size_t>(i)] != 0.0) hits.push_back(i);
            if (!hits.empty()) {
                const std::int64_t pick = hits[static_cast<std::size_t>(
                    std::uniform_int_distribution<std::size_t>(0, hits.size() - 1)(rng))];
                const std::int64_t tm = pick / (H * W);
                const std::int64_t ym = (pick / W) % H;
                const std::int64_t xm = pick % W;
                t0 = std::clamp<std::int64_t>(tm - T / 2, std::max<std::int64_t>(0, tm - T + 1), tm);
                y0 = std::clamp<std::int64_t>(ym - crop / 2, 0, H - crop);
                x0 = std::clamp<std::int64_t>(xm - crop / 2, 0, W - crop);
            }
        }
    }

    CropSample out;
    out.input = Tensor::zeros({T, crop, crop});
    out.mask = Tensor::zeros({T, crop, crop});
    auto id = out.input.mutable_data();
    auto md = out.mask.mutable_data();
    const auto fd = seq.frames.data();
    const auto mkd = seq.has_mask() ? seq.masks.data() : std::span<const double>{};
    const std::int64_t tn = std::min<std::int64_t>(T, L - t0);
    for (std::int64_t t = 0; t < tn; ++t) {
        for (std::int64_t y = 0; y < crop; ++y) {
            const std::int64_t src = ((t0 + t) * H + (y0 + y)) * W + x0;
            const std::int64_t dst = (t * crop + y) * crop;
            for (std::int64_t x = 0; x < crop; ++x) {
                id[static_cast<std::size_t>(dst + x)] = fd[static_cast<std::size_t>(src + x)];
                if (!mkd.empty()) md[static_cast<std::size_t>(dst + x)] = mkd[static_cast<std::size_t>(src + x)];
            }
        }
    }
    for (double v : md)
        if (v != 0.0) {
            out.has_target = true;
            break;
        }
    return out;
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a * 0x9e3779b97f4a7c15ull + b + 0x7f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

TrainResult train(net::Model& model, const std::vector<sim::Sequence>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw ShapeError("train: empty dataset");
    for (const auto& seq : dataset)
        if (!seq.has_mask()) throw ShapeError("train: sequence '" + seq.name + "' has no masks");

    Adam opt(model);
    TrainResult result;
    const std::int64_t T = model.spec.T;
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at_epoch(epoch);
        std::mt19937_64 shuffle_rng(mix(cfg.seed, 0x5e0 + static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        const int steps = static_cast<int>((order.size() + cfg.batch_size - 1) / cfg.batch_size);
        for (int step = 0; step < steps; ++step) {
            model.zero_grads();
            const std::size_t lo = static_cast<std::size_t>(step) * cfg.batch_size;
            const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
            double loss_acc = 0.0;
            try {
                for (std::size_t slot = lo; slot < hi; ++slot) {
                    const sim::Sequence& seq = dataset[order[slot]];
                    std::mt19937_64 rng(mix(cfg.seed, (static_cast<std::uint64_t>(epoch) << 24) ^
                                                          (static_cast<std::uint64_t>(step) << 8) ^ slot));
                    CropSample sample = sample_crop(seq, T, cfg.crop, cfg.presence, rng);
                    Tape tape;
                    std::vector<BnUpdate> updates;
                    Tensor logits = net::forward(tape, model, sample.input, /*training=*/true, &updates);
                    Tensor loss = soft_iou_loss(tape, logits, sample.mask);
                    tape.backward(loss);
                    for (const BnUpdate& u : updates) u.apply();
                    loss_acc += loss.value();
                }
                const double inv = 1.0 / static_cast<double>(hi - lo);
                model.visit_params([&](const std::string&, Tensor& t) {
                    if (!t.has_grad()) return;
                    auto& g = detail::grad_buffer(t);
                    for (double& v : g) v *= inv;
                });
                opt.step(lr);
            } catch (const NumericError& e) {
                throw NumericError("training aborted at epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step) + ": " + e.what());
            }
            const double loss_mean = loss_acc / static_cast<double>(hi - lo);
            result.log.push_back(TrainLogRow{epoch, step, loss_mean, lr});
            result.final_loss = loss_mean;
        }
    }
    return result;
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
    std::ostringstream os;
    os << "epoch,step,loss,lr\n";
    for (const auto& row : log) os << row.epoch << ',' << row.step << ',' << row.loss << ',' << row.lr << '\n';
    return os.str();
}

std::vector<TileWindow> plan_tiling(std::int64_t L, std::int64_t T, double overlap) {
    if (L < 1) throw ShapeError("plan_tiling: sequence length must be >= 1");
    if (T < 1) throw ShapeError("plan_tiling: window length must be >= 1");
    if (overlap < 0.0 || overlap >= 1.0) throw ShapeError("plan_tiling: overlap must be in [0,1)");
    const std::int64_t stride = std::max<std::int64_t>(1, std::llround((1.0 - overlap) * static_cast<double>(T)));

    std::vector<TileWindow> plan;
    std::int64_t covered = 0;  // last covered frame, 1-indexed
    for (std::int64_t k = 0; covered < L; ++k) {
        const std::int64_t scheduled = 1 + k * stride;
        if (scheduled + T - 1 <= L) {
            plan.push_back(TileWindow{scheduled, scheduled, T});
            covered = scheduled + T - 1;
        } else {
            const std::int64_t start = std::max<std::int64_t>(1, L - T + 1);
            plan.push_back(TileWindow{scheduled, start, std::min(T, L)});
            covered = L;
        }
    }
    return plan;
}

Detection detect_sequence(const net::Model& model, const Tensor& frames, double overlap, double threshold) {
    if (frames.dim() != 3) throw ShapeError("detect_sequence: frames must be [L,H,W]");
    const std::int64_t L = frames.extent(0), H = frames.extent(1), W = frames.extent(2);
    const std::int64_t T = model.spec.T;
    const auto plan = plan_tiling(L, T, overlap);

    net::ParamGradGuard guard(const_cast<net::Model&>(model));
    Detection det;
    det.confidence = Tensor::zeros({L, H, W});
    det.mask = Tensor::zeros({L, H, W});
    auto conf = det.confidence.mutable_data();
    const auto fd = frames.data();
    const std::int64_t HW = H * W;

    for (const TileWindow& win : plan) {
        const std::int64_t t0 = win.start - 1;
        Tensor cube = Tensor::zeros({win.frames, H, W});
        auto cd = cube.mutable_data();
        std::copy(fd.begin() + t0 * HW, fd.begin() + (t0 + win.frames) * HW, cd.begin());
        Tensor c = net::predict(model, cube);  // [T,H,W]
        const auto cdat = c.data();
        for (std::int64_t t = 0; t < win.frames; ++t) {
            double* dst = conf.data() + (t0 + t) * HW;
            const double* src = cdat.data() + t * HW;
            for (std::int64_t i = 0; i < HW; ++i) dst[i] = std::max(dst[i], src[i]);
        }
    }
    auto mk = det.mask.mutable_data();
    for (std::size_t i = 0; i < mk.size(); ++i) mk[i] = conf[i] > threshold ? 1.0 : 0.0;
    return det;
}

}  // namespace tempro::train
