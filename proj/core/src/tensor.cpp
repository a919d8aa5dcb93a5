#include "tempro/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace tempro {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto st = std::make_shared<Storage>();
    st->data.assign(static_cast<std::size_t>(numel(shape)), 0.0);
    st->shape = std::move(shape);
    st->requires_grad = requires_grad;
    return Tensor(std::move(st));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.st_->data.begin(), t.st_->data.end(), value);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (numel(shape) != static_cast<std::int64_t>(data.size()))
        throw ShapeError("from_data: " + std::to_string(data.size()) + " values for shape " + shape_str(shape));
    auto st = std::make_shared<Storage>();
    st->shape = std::move(shape);
    st->data = std::move(data);
    st->requires_grad = requires_grad;
    return Tensor(std::move(st));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::int64_t n, bool requires_grad) {
    Tensor t = zeros({n, n}, requires_grad);
    auto d = t.mutable_data();
    for (std::int64_t i = 0; i < n; ++i) d[static_cast<std::size_t>(i * n + i)] = 1.0;
    return t;
}

const Shape& Tensor::shape() const {
    if (!st_) throw ShapeError("shape() on undefined tensor");
    return st_->shape;
}

int Tensor::dim() const { return static_cast<int>(shape().size()); }

std::int64_t Tensor::extent(int axis) const {
    const Shape& s = shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) throw ShapeError("extent: axis out of range");
    return s[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::size() const { return static_cast<std::int64_t>(st_ ? st_->data.size() : 0); }

std::span<const double> Tensor::data() const {
    if (!st_) throw ShapeError("data() on undefined tensor");
    return st_->data;
}

std::span<double> Tensor::mutable_data() {
    if (!st_) throw ShapeError("mutable_data() on undefined tensor");
    return st_->data;
}

bool Tensor::requires_grad() const { return st_ && st_->requires_grad; }

void Tensor::set_requires_grad(bool rg) {
    if (!st_) throw ShapeError("set_requires_grad() on undefined tensor");
    st_->requires_grad = rg;
}

bool Tensor::has_grad() const { return st_ && !st_->grad.empty(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw NumericError("grad() on tensor without gradient");
    return st_->grad;
}

void Tensor::zero_grad() {
    if (st_) std::fill(st_->grad.begin(), st_->grad.end(), 0.0);
}

double Tensor::value() const {
    if (size() != 1) throw ShapeError("value() on tensor of size " + std::to_string(size()));
    return st_->data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    const Shape& s = shape();
    if (idx.size() != s.size()) throw ShapeError("at(): rank mismatch");
    std::int64_t flat = 0;
    std::size_t k = 0;
    for (auto i : idx) {
        if (i < 0 || i >= s[k]) throw ShapeError("at(): index out of range");
        flat = flat * s[k] + i;
        ++k;
    }
    return st_->data[static_cast<std::size_t>(flat)];
}

Tensor Tensor::clone() const {
    if (!st_) return {};
    return from_data(st_->shape, st_->data, st_->requires_grad);
}

namespace detail {

void ensure_finite(const Tensor& t, const char* op) {
    const auto d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!std::isfinite(d[i]))
            throw NumericError(std::string(op) + ": non-finite value " + std::to_string(d[i]) +
                               " at flat index " + std::to_string(i));
    }
}

void ensure_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

std::vector<double>& grad_buffer(Tensor& t) {
    auto* st = t.storage();
    if (st->grad.empty()) st->grad.assign(st->data.size(), 0.0);
    return st->grad;
}

}  // namespace detail

std::span<double> BackwardCtx::grad_for(std::size_t i) {
    Tensor t = inputs_[i];
    return detail::grad_buffer(t);
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn) {
    entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ShapeError("backward: loss must be a one-element tensor");
    if (consumed_) throw NumericError("backward: tape already consumed");
    if (!loss.requires_grad()) throw NumericError("backward: loss does not require grad");

    bool attached = false;
    for (const auto& e : entries_) {
        if (e.output.id() == loss.id()) { attached = true; break; }
    }
    if (!attached) throw NumericError("backward: loss is not attached to this tape");

    {
        Tensor seed = loss;
        detail::grad_buffer(seed)[0] = 1.0;
    }

    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        Entry& e = *it;
        auto* out_st = e.output.storage();
        if (out_st->grad.empty()) continue;  // not on the path to the loss
        BackwardCtx ctx(out_st->grad, e.inputs, e.output);
        e.fn(ctx);
        // Every consumer of this output was recorded later, hence already
        // processed in this reverse sweep; its gradient is final and can go.
        out_st->grad.clear();
        out_st->grad.shrink_to_fit();
    }
    consumed_ = true;
}

void Tape::clear() {
    entries_.clear();
    consumed_ = false;
}

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->requires_grad()) return true;
    return false;
}

Tensor make_output(Shape shape, bool track) {
    Tensor out = Tensor::zeros(std::move(shape));
    if (track) out.set_requires_grad(true);
    return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    detail::ensure_same_shape(a, b, "add");
    const bool track = any_requires_grad({&a, &b});
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] + db[i];
    detail::ensure_finite(out, "add");
    if (track) {
        tape.record({a, b}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            for (std::size_t k = 0; k < 2; ++k) {
                if (!ctx.needs_grad(k)) continue;
                auto gi = ctx.grad_for(k);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    detail::ensure_same_shape(a, b, "sub");
    const bool track = any_requires_grad({&a, &b});
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] - db[i];
    detail::ensure_finite(out, "sub");
    if (track) {
        tape.record({a, b}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            if (ctx.needs_grad(0)) {
                auto gi = ctx.grad_for(0);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
            }
            if (ctx.needs_grad(1)) {
                auto gi = ctx.grad_for(1);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    detail::ensure_same_shape(a, b, "mul");
    const bool track = any_requires_grad({&a, &b});
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] * db[i];
    detail::ensure_finite(out, "mul");
    if (track) {
        tape.record({a, b}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            const auto da = ctx.input(0).data(), db = ctx.input(1).data();
            if (ctx.needs_grad(0)) {
                auto gi = ctx.grad_for(0);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * db[i];
            }
            if (ctx.needs_grad(1)) {
                auto gi = ctx.grad_for(1);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * da[i];
            }
        });
    }
    return out;
}

Tensor div(Tape& tape, const Tensor& a, const Tensor& b) {
    detail::ensure_same_shape(a, b, "div");
    const bool track = any_requires_grad({&a, &b});
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] / db[i];
    detail::ensure_finite(out, "div");
    if (track) {
        tape.record({a, b}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            const auto da = ctx.input(0).data(), db = ctx.input(1).data();
            if (ctx.needs_grad(0)) {
                auto gi = ctx.grad_for(0);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] / db[i];
            }
            if (ctx.needs_grad(1)) {
                auto gi = ctx.grad_for(1);
                for (std::size_t i = 0; i < g.size(); ++i) gi[i] -= g[i] * da[i] / (db[i] * db[i]);
            }
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
    const bool track = a.requires_grad();
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] * c;
    detail::ensure_finite(out, "scale");
    if (track) {
        tape.record({a}, out, [c](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * c;
        });
    }
    return out;
}

Tensor add_const(Tape& tape, const Tensor& a, double c) {
    const bool track = a.requires_grad();
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] + c;
    detail::ensure_finite(out, "add_const");
    if (track) {
        tape.record({a}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
    const bool track = a.requires_grad();
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = da[i] > 0.0 ? da[i] : 0.0;
    detail::ensure_finite(out, "relu");
    if (track) {
        tape.record({a}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            const auto da = ctx.input(0).data();
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (da[i] > 0.0) gi[i] += g[i];
        });
    }
    return out;
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
    const bool track = a.requires_grad();
    Tensor out = make_output(a.shape(), track);
    auto o = out.mutable_data();
    const auto da = a.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-da[i]));
    detail::ensure_finite(out, "sigmoid");
    if (track) {
        tape.record({a}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            const auto y = ctx.output().data();
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
        });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
    const bool track = a.requires_grad();
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    Tensor out = Tensor::scalar(acc);
    if (track) out.set_requires_grad(true);
    detail::ensure_finite(out, "sum");
    if (track) {
        tape.record({a}, out, [](BackwardCtx& ctx) {
            const double g = ctx.out_grad()[0];
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g;
        });
    }
    return out;
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
    if (numel(shape) != a.size())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    const bool track = a.requires_grad();
    Tensor out = Tensor::from_data(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
    if (track) {
        out.set_requires_grad(true);
        tape.record({a}, out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gi = ctx.grad_for(0);
            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        });
    }
    return out;
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    Shape shape = parts[0].shape();
    if (shape.empty()) throw ShapeError("concat_channels: rank-0 input");
    std::int64_t total = 0;
    bool track = false;
    for (const Tensor& p : parts) {
        if (p.dim() != static_cast<int>(shape.size()))
            throw ShapeError("concat_channels: rank mismatch");
        for (std::size_t d = 1; d < shape.size(); ++d)
            if (p.shape()[d] != shape[d]) throw ShapeError("concat_channels: trailing dims differ");
        total += p.extent(0);
        track = track || p.requires_grad();
    }
    shape[0] = total;
    Tensor out = make_output(shape, track);
    auto o = out.mutable_data();
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        const auto d = p.data();
        std::copy(d.begin(), d.end(), o.begin() + static_cast<std::ptrdiff_t>(off));
        off += d.size();
    }
    if (track) {
        tape.record(std::vector<Tensor>(parts.begin(), parts.end()), out, [](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            std::size_t off = 0;
            for (std::size_t k = 0; k < ctx.input_count(); ++k) {
                const std::size_t n = ctx.input(k).data().size();
                if (ctx.needs_grad(k)) {
                    auto gi = ctx.grad_for(k);
                    for (std::size_t i = 0; i < n; ++i) gi[i] += g[off + i];
                }
                off += n;
            }
        });
    }
    return out;
}

Tensor slice_channels(Tape& tape, const Tensor& a, std::int64_t begin, std::int64_t end) {
    if (a.dim() < 1) throw ShapeError("slice_channels: rank-0 input");
    const std::int64_t c = a.extent(0);
    if (begin < 0 || end > c || begin >= end)
        throw ShapeError("slice_channels: bad range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + std::to_string(c));
    Shape shape = a.shape();
    shape[0] = end - begin;
    const std::int64_t inner = a.size() / c;
    const bool track = a.requires_grad();
    Tensor out = make_output(shape, track);
    auto o = out.mutable_data();
    const auto d = a.data();
    std::copy(d.begin() + static_cast<std::ptrdiff_t>(begin * inner),
              d.begin() + static_cast<std::ptrdiff_t>(end * inner), o.begin());
    if (track) {
        tape.record({a}, out, [begin, inner](BackwardCtx& ctx) {
            const auto g = ctx.out_grad();
            auto gi = ctx.grad_for(0);
            const std::size_t off = static_cast<std::size_t>(begin * inner);
            for (std::size_t i = 0; i < g.size(); ++i) gi[off + i] += g[i];
        });
    }
    return out;
}

}  // namespace tempro
