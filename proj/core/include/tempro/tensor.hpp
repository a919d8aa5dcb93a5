#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tempro {

/// Thrown on dimension/shape violations.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation produces NaN/Inf or the autodiff graph is unusable.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense N-d array of f64 with optional gradient buffer. Value-semantics
/// handle over shared storage; data is immutable once produced by an op
/// (parameters are mutated only through mutable_data(), between tapes).
class Tensor {
 public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor identity(std::int64_t n, bool requires_grad = false);

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const;
    int dim() const;
    std::int64_t extent(int axis) const;
    std::int64_t size() const;

    std::span<const double> data() const;
    /// Direct write access (parameter initialization / optimizer steps).
    /// Never call on a tensor that is part of a live tape.
    std::span<double> mutable_data();

    bool requires_grad() const;
    void set_requires_grad(bool rg);
    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    /// Value of a one-element tensor.
    double value() const;
    double at(std::initializer_list<std::int64_t> idx) const;

    /// Deep copy of data (grad not copied).
    Tensor clone() const;

    /// Identity of the underlying storage (for graph bookkeeping).
    const void* id() const { return st_.get(); }

    struct Storage {
        Shape shape;
        std::vector<double> data;
        bool requires_grad = false;
        std::vector<double> grad;  // empty until touched by backward
    };
    Storage* storage() { return st_.get(); }
    const Storage* storage() const { return st_.get(); }

 private:
    explicit Tensor(std::shared_ptr<Storage> st) : st_(std::move(st)) {}
    std::shared_ptr<Storage> st_;
};

/// Context handed to an op's backward rule.
class BackwardCtx {
 public:
    BackwardCtx(std::span<const double> out_grad, std::span<const Tensor> inputs, const Tensor& output)
        : out_grad_(out_grad), inputs_(inputs), output_(output) {}

    std::span<const double> out_grad() const { return out_grad_; }
    const Tensor& output() const { return output_; }
    const Tensor& input(std::size_t i) const { return inputs_[i]; }
    std::size_t input_count() const { return inputs_.size(); }

    /// True if gradient must be propagated into input i.
    bool needs_grad(std::size_t i) const { return inputs_[i].requires_grad(); }
    /// Accumulation buffer for input i (allocated zero on first use).
    std::span<double> grad_for(std::size_t i);

 private:
    std::span<const double> out_grad_;
    std::span<const Tensor> inputs_;
    const Tensor& output_;
};

using BackwardFn = std::function<void(BackwardCtx&)>;

/// Reverse-mode tape. Ops append entries in execution order (so every entry's
/// inputs precede it); backward() replays them once, in reverse.
class Tape {
 public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Records a backward rule for `output`. Called by ops only when at least
    /// one input requires grad; output must be a fresh tensor.
    void record(std::vector<Tensor> inputs, Tensor output, BackwardFn fn);

    /// Seeds d(loss)/d(loss) = 1 and propagates through the tape. Gradients of
    /// intermediate outputs are released as soon as they are fully consumed;
    /// leaf tensors (parameters, inputs) keep theirs.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    void clear();

 private:
    struct Entry {
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn fn;
    };
    std::vector<Entry> entries_;
    bool consumed_ = false;
};

namespace detail {
/// Throws NumericError if any element of t is NaN/Inf.
void ensure_finite(const Tensor& t, const char* op);
void ensure_same_shape(const Tensor& a, const Tensor& b, const char* op);
std::vector<double>& grad_buffer(Tensor& t);
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise / reduction / shape ops. All record onto `tape` when any input
// requires grad; outputs are always freshly allocated.
// ---------------------------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor div(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor add_const(Tape& tape, const Tensor& a, double c);
Tensor relu(Tape& tape, const Tensor& a);
Tensor sigmoid(Tape& tape, const Tensor& a);
/// Full reduction to a one-element tensor.
Tensor sum(Tape& tape, const Tensor& a);
/// Same data, new shape (numel must match).
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);
/// Concatenation along dim 0.
Tensor concat_channels(Tape& tape, std::span<const Tensor> parts);
/// [begin, end) slab along dim 0.
Tensor slice_channels(Tape& tape, const Tensor& a, std::int64_t begin, std::int64_t end);

}  // namespace tempro
