#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "skillkt/tensor.hpp"

namespace skillkt {

enum class OpKind
{
    leaf,
    matmul,
    add,
    mul,
    scale,
    relu,
    sigmoid,
    softmax,
    layer_norm,
    gather,
    dropout,
    batched_matmul,
    slice,
    concat,
    sum,
    mean_square,
    binary_cross_entropy,
};

const char* op_name(OpKind op) noexcept;

template <class Scalar_>
class Tape;

/// Handle to a value recorded on a tape.
template <class Scalar_>
class Var
{
public:
    using Scalar = Scalar_;

    Var() = default;
    Var(Tape<Scalar>* tape, std::size_t id)
        : tape_(tape)
        , id_(id)
    {}

    Tape<Scalar>& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

    const Tensor<Scalar>& value() const { return tape_->value(id_); }
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const { return tape_->requires_grad(id_); }
    Tensor<Scalar> grad() const { return tape_->gradient(*this); }

private:
    Tape<Scalar>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/**
 * Append-only record of primitive applications.
 *
 * Entries are stored in creation order, which is a topological order since an
 * op can only consume values that already exist. A tape is single-owner and
 * not thread-safe.
 */
template <class Scalar_>
class Tape
{
public:
    using Scalar = Scalar_;
    using Mat = Matrix<Scalar>;
    using BackwardFn = std::function<void(Tape&, std::size_t out_id, const Mat& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<Scalar> leaf(Tensor<Scalar> value, bool requires_grad = false)
    {
        entries_.push_back(Entry{OpKind::leaf, {}, std::move(value), Mat(), requires_grad, false, {}});
        return Var<Scalar>(this, entries_.size() - 1);
    }

    Var<Scalar> constant(Tensor<Scalar> value) { return leaf(std::move(value), false); }

    /// Records an op output. The backward closure is dropped when no input needs a gradient.
    Var<Scalar> record(OpKind op, std::vector<std::size_t> inputs, Tensor<Scalar> value, BackwardFn backward)
    {
        bool needs = false;
        for (auto i : inputs) needs = needs || entries_.at(i).requires_grad;
        if (!needs) backward = nullptr;
        entries_.push_back(Entry{op, std::move(inputs), std::move(value), Mat(), needs, false, std::move(backward)});
        return Var<Scalar>(this, entries_.size() - 1);
    }

    const Tensor<Scalar>& value(std::size_t id) const { return entries_.at(id).value; }
    bool requires_grad(std::size_t id) const { return entries_.at(id).requires_grad; }
    OpKind op(std::size_t id) const { return entries_.at(id).op; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return entries_.at(id).inputs; }

    std::size_t size() const noexcept { return entries_.size(); }

    /// Gradient buffer for an entry, zero-allocated on first use; nullptr when the entry needs none.
    Mat* grad_slot(std::size_t id)
    {
        auto& e = entries_[id];
        if (!e.requires_grad) return nullptr;
        if (!e.has_grad) {
            e.grad = Mat::Zero(e.value.rows(), e.value.cols());
            e.has_grad = true;
        }
        return &e.grad;
    }

    /// Reverse sweep from a scalar loss. Returns the number of adjoint propagations performed.
    std::size_t backward(const Var<Scalar>& loss)
    {
        if (loss.value().size() != 1) {
            throw ShapeError("backward: loss must be a 1-element tensor, got shape " + shape_str(loss.shape()));
        }
        for (auto& e : entries_) {
            e.has_grad = false;
            e.grad.resize(0, 0);
        }
        std::size_t steps = 0;
        if (!entries_[loss.id()].requires_grad) {
            last_steps_ = 0;
            return 0;
        }
        grad_slot(loss.id())->setOnes();
        for (std::size_t k = loss.id() + 1; k-- > 0;) {
            auto& e = entries_[k];
            if (!e.has_grad || !e.backward) continue;
            e.backward(*this, k, e.grad);
            ++steps;
        }
        last_steps_ = steps;
        return steps;
    }

    std::size_t last_backward_steps() const noexcept { return last_steps_; }

    Tensor<Scalar> gradient(const Var<Scalar>& v) const
    {
        const auto& e = entries_.at(v.id());
        if (e.has_grad) return Tensor<Scalar>(e.value.shape(), e.grad);
        return Tensor<Scalar>(e.value.shape());
    }

private:
    struct Entry
    {
        OpKind op;
        std::vector<std::size_t> inputs;
        Tensor<Scalar> value;
        Mat grad;
        bool requires_grad;
        bool has_grad;
        BackwardFn backward;
    };

    std::deque<Entry> entries_;
    std::size_t last_steps_ = 0;
};

namespace detail {

template <class S>
void check_same_tape(const Var<S>& a, const Var<S>& b, const char* op)
{
    if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands live on different tapes");
}

[[noreturn]] inline void shape_mismatch(const char* op, const Shape& a, const Shape& b)
{
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

inline bool is_suffix(const Shape& whole, const Shape& tail)
{
    if (tail.size() > whole.size()) return false;
    return std::equal(tail.begin(), tail.end(), whole.end() - static_cast<std::ptrdiff_t>(tail.size()));
}

template <class S>
S clamp_probability(S p)
{
    constexpr S lo = S(1e-7);
    constexpr S hi = S(1) - S(1e-7);
    return p < lo ? lo : (p > hi ? hi : p);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Primitives. Every op validates shapes and throws ShapeError naming itself and
// the offending shapes.
// ---------------------------------------------------------------------------

/// x[..., n] · w[n, m] -> [..., m]
template <class S>
Var<S> matmul(const Var<S>& x, const Var<S>& w);

/// Elementwise sum. `b` may also match the trailing extents of `a`, in which case it is
/// broadcast over the leading (batch) extent.
template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b);

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b);

template <class S>
Var<S> scale(const Var<S>& a, S factor);

template <class S>
Var<S> relu(const Var<S>& a);

template <class S>
Var<S> sigmoid(const Var<S>& a);

/**
 * Softmax over the last axis with an optional additive mask.
 *
 * The mask's shape must match the trailing extents of `x`; it is broadcast over
 * the leading ones. Entries equal to -inf are excluded: their outputs are exactly
 * zero and they receive no gradient. A fully masked row yields all zeros.
 */
template <class S>
Var<S> softmax(const Var<S>& x, const Tensor<S>* mask = nullptr);

template <class S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta, S eps = S(1e-5));

/// Row gather: out[i] = table[ids[i]]; id -1 yields a zero row (padding).
template <class S>
Var<S> gather(const Var<S>& table, std::span<const std::int32_t> ids, const Shape& ids_shape);

/// Inverted dropout. Identity when `training` is false or `drop_prob` is 0.
template <class S>
Var<S> dropout(const Var<S>& x, double drop_prob, std::uint64_t seed, bool training);

/// Per-batch matrix product over rank-3 operands: [B,n,k]·[B,k,m], or [B,n,k]·[B,m,k]ᵀ.
template <class S>
Var<S> batched_matmul(const Var<S>& a, const Var<S>& b, bool transpose_b = false);

/// Columns [start, start+len) of the last axis.
template <class S>
Var<S> slice_last(const Var<S>& x, Index start, Index len);

template <class S>
Var<S> concat_last(std::span<const Var<S>> parts);

template <class S>
Var<S> sum(const Var<S>& x);

/**
 * Masked mean-square reduction over rows of the last axis:
 *   (1/N) Σ_{valid r} ‖pred_r − target_r‖² / k,   N = #valid rows, k = last extent.
 * Returns 0 when no row is valid. `target` is a constant.
 */
template <class S>
Var<S> mean_square(const Var<S>& pred, const Tensor<S>& target, std::span<const std::uint8_t> row_mask);

/**
 * Masked binary cross-entropy on probabilities (last extent 1), clamped to
 * [1e-7, 1 − 1e-7] and averaged over valid rows. Returns 0 when no row is valid.
 */
template <class S>
Var<S> binary_cross_entropy(const Var<S>& prob, std::span<const std::uint8_t> labels,
                            std::span<const std::uint8_t> row_mask);

template <class S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) { return add(a, b); }

template <class S>
Var<S> operator*(const Var<S>& a, const Var<S>& b) { return mul(a, b); }

template <class S>
Var<S> operator*(S factor, const Var<S>& a) { return scale(a, factor); }

} // namespace skillkt

#include "skillkt/autodiff_impl.hpp"
