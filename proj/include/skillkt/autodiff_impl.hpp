#pragma once

// Definitions for the primitives declared in autodiff.hpp.

#include <algorithm>

namespace skillkt {

inline const char* op_name(OpKind op) noexcept
{
    switch (op) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softmax: return "softmax";
    case OpKind::layer_norm: return "layer_norm";
    case OpKind::gather: return "gather";
    case OpKind::dropout: return "dropout";
    case OpKind::batched_matmul: return "batched_matmul";
    case OpKind::slice: return "slice";
    case OpKind::concat: return "concat";
    case OpKind::sum: return "sum";
    case OpKind::mean_square: return "mean_square";
    case OpKind::binary_cross_entropy: return "binary_cross_entropy";
    }
    return "unknown";
}

template <class S>
Var<S> matmul(const Var<S>& x, const Var<S>& w)
{
    detail::check_same_tape(x, w, "matmul");
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (ws.size() != 2 || xs.back() != ws[0]) detail::shape_mismatch("matmul", xs, ws);
    Shape out_shape = xs;
    out_shape.back() = ws[1];
    Matrix<S> y(x.value().rows(), ws[1]);
    y.noalias() = x.value().matrix() * w.value().matrix();
    const auto xi = x.id(), wi = w.id();
    return x.tape().record(OpKind::matmul, {xi, wi}, Tensor<S>(out_shape, std::move(y)),
        [xi, wi](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* gx = t.grad_slot(xi)) gx->noalias() += dy * t.value(wi).matrix().transpose();
            if (auto* gw = t.grad_slot(wi)) gw->noalias() += t.value(xi).matrix().transpose() * dy;
        });
}

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b)
{
    detail::check_same_tape(a, b, "add");
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (!detail::is_suffix(as, bs)) detail::shape_mismatch("add", as, bs);
    const Index block = b.value().rows();
    const Index reps = a.value().rows() / block;
    Matrix<S> y = a.value().matrix();
    for (Index r = 0; r < reps; ++r) y.middleRows(r * block, block) += b.value().matrix();
    const auto ai = a.id(), bi = b.id();
    return a.tape().record(OpKind::add, {ai, bi}, Tensor<S>(as, std::move(y)),
        [ai, bi, block, reps](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* ga = t.grad_slot(ai)) *ga += dy;
            if (auto* gb = t.grad_slot(bi)) {
                for (Index r = 0; r < reps; ++r) *gb += dy.middleRows(r * block, block);
            }
        });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b)
{
    detail::check_same_tape(a, b, "mul");
    if (a.shape() != b.shape()) detail::shape_mismatch("mul", a.shape(), b.shape());
    Matrix<S> y = a.value().matrix().cwiseProduct(b.value().matrix());
    const auto ai = a.id(), bi = b.id();
    return a.tape().record(OpKind::mul, {ai, bi}, Tensor<S>(a.shape(), std::move(y)),
        [ai, bi](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* ga = t.grad_slot(ai)) *ga += dy.cwiseProduct(t.value(bi).matrix());
            if (auto* gb = t.grad_slot(bi)) *gb += dy.cwiseProduct(t.value(ai).matrix());
        });
}

template <class S>
Var<S> scale(const Var<S>& a, S factor)
{
    Matrix<S> y = a.value().matrix() * factor;
    const auto ai = a.id();
    return a.tape().record(OpKind::scale, {ai}, Tensor<S>(a.shape(), std::move(y)),
        [ai, factor](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* ga = t.grad_slot(ai)) *ga += dy * factor;
        });
}

template <class S>
Var<S> relu(const Var<S>& a)
{
    Matrix<S> y = a.value().matrix().cwiseMax(S(0));
    const auto ai = a.id();
    return a.tape().record(OpKind::relu, {ai}, Tensor<S>(a.shape(), std::move(y)),
        [ai](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* ga = t.grad_slot(ai)) {
                *ga += (t.value(ai).matrix().array() > S(0)).select(dy, S(0)).matrix();
            }
        });
}

template <class S>
Var<S> sigmoid(const Var<S>& a)
{
    Matrix<S> y = a.value().matrix().unaryExpr([](S v) {
        // split on sign so exp never overflows
        if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
        const S e = std::exp(v);
        return e / (S(1) + e);
    });
    const auto ai = a.id();
    return a.tape().record(OpKind::sigmoid, {ai}, Tensor<S>(a.shape(), std::move(y)),
        [ai](Tape<S>& t, std::size_t self, const Matrix<S>& dy) {
            if (auto* ga = t.grad_slot(ai)) {
                const auto& s = t.value(self).matrix().array();
                *ga += (dy.array() * s * (S(1) - s)).matrix();
            }
        });
}

template <class S>
Var<S> softmax(const Var<S>& x, const Tensor<S>* mask)
{
    const auto& xv = x.value().matrix();
    if (mask && !detail::is_suffix(x.shape(), mask->shape())) {
        detail::shape_mismatch("softmax", x.shape(), mask->shape());
    }
    const Index mrows = mask ? mask->rows() : 1;
    Matrix<S> y(xv.rows(), xv.cols());
    for (Index r = 0; r < xv.rows(); ++r) {
        S peak = -std::numeric_limits<S>::infinity();
        for (Index c = 0; c < xv.cols(); ++c) {
            const S m = mask ? mask->matrix()(r % mrows, c) : S(0);
            if (m == -std::numeric_limits<S>::infinity()) continue;
            peak = std::max(peak, xv(r, c) + m);
        }
        if (peak == -std::numeric_limits<S>::infinity()) {
            y.row(r).setZero();
            continue;
        }
        S total = 0;
        for (Index c = 0; c < xv.cols(); ++c) {
            const S m = mask ? mask->matrix()(r % mrows, c) : S(0);
            if (m == -std::numeric_limits<S>::infinity()) {
                y(r, c) = S(0);
            } else {
                y(r, c) = std::exp(xv(r, c) + m - peak);
                total += y(r, c);
            }
        }
        y.row(r) /= total;
    }
    const auto xi = x.id();
    return x.tape().record(OpKind::softmax, {xi}, Tensor<S>(x.shape(), std::move(y)),
        [xi](Tape<S>& t, std::size_t self, const Matrix<S>& dy) {
            if (auto* gx = t.grad_slot(xi)) {
                const auto& s = t.value(self).matrix();
                const Vector<S> inner = dy.cwiseProduct(s).rowwise().sum();
                *gx += (s.array() * (dy.colwise() - inner).array()).matrix();
            }
        });
}

template <class S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta, S eps)
{
    detail::check_same_tape(x, gamma, "layer_norm");
    detail::check_same_tape(x, beta, "layer_norm");
    const Index d = x.shape().back();
    if (gamma.shape() != Shape{d}) detail::shape_mismatch("layer_norm", x.shape(), gamma.shape());
    if (beta.shape() != Shape{d}) detail::shape_mismatch("layer_norm", x.shape(), beta.shape());

    const auto& xv = x.value().matrix();
    const Vector<S> mean = xv.rowwise().mean();
    Matrix<S> xhat = xv.colwise() - mean;
    const Vector<S> inv_std =
        ((xhat.array().square().rowwise().sum() / S(d)) + eps).rsqrt().matrix();
    xhat.array().colwise() *= inv_std.array();

    const auto g = gamma.value().matrix().row(0).array();
    const auto b = beta.value().matrix().row(0).array();
    Matrix<S> y = ((xhat.array().rowwise() * g).rowwise() + b).matrix();

    const auto xi = x.id(), gi = gamma.id(), bi = beta.id();
    return x.tape().record(OpKind::layer_norm, {xi, gi, bi}, Tensor<S>(x.shape(), std::move(y)),
        [xi, gi, bi, d, eps](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            // The input gradient is a difference of nearly equal terms when d is small, so the
            // sweep runs in double from the raw input rather than the rounded normalised values.
            using Acc = Matrix<double>;
            const Acc xv = t.value(xi).matrix().template cast<double>();
            const Acc dyv = dy.template cast<double>();
            const Eigen::VectorXd mu = xv.rowwise().mean();
            Acc xh = xv.colwise() - mu;
            const Eigen::VectorXd rstd =
                ((xh.array().square().rowwise().sum() / double(d)) + double(eps)).rsqrt().matrix();
            xh.array().colwise() *= rstd.array();
            if (auto* gg = t.grad_slot(gi)) *gg += dyv.cwiseProduct(xh).colwise().sum().template cast<S>();
            if (auto* gb = t.grad_slot(bi)) *gb += dy.colwise().sum();
            if (auto* gx = t.grad_slot(xi)) {
                const auto gvec = t.value(gi).matrix().row(0).template cast<double>().array();
                const Acc dxhat = (dyv.array().rowwise() * gvec).matrix();
                const Eigen::VectorXd mean_d = dxhat.rowwise().mean();
                const Eigen::VectorXd mean_dx = dxhat.cwiseProduct(xh).rowwise().sum() / double(d);
                Acc dx = dxhat.colwise() - mean_d;
                dx -= (xh.array().colwise() * mean_dx.array()).matrix();
                dx.array().colwise() *= rstd.array();
                *gx += dx.template cast<S>();
            }
        });
}

template <class S>
Var<S> gather(const Var<S>& table, std::span<const std::int32_t> ids, const Shape& ids_shape)
{
    const auto& ts = table.shape();
    if (ts.size() != 2) throw ShapeError("gather: table must be rank 2, got " + shape_str(ts));
    if (shape_size(ids_shape) != static_cast<Index>(ids.size())) {
        throw ShapeError("gather: " + std::to_string(ids.size()) + " ids do not fit shape " + shape_str(ids_shape));
    }
    const Index rows = ts[0];
    Matrix<S> y(static_cast<Index>(ids.size()), ts[1]);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto id = ids[i];
        if (id == -1) {
            y.row(static_cast<Index>(i)).setZero();
        } else if (id < 0 || id >= rows) {
            throw RangeError("gather: id " + std::to_string(id) + " outside table of " + std::to_string(rows) + " rows");
        } else {
            y.row(static_cast<Index>(i)) = table.value().matrix().row(id);
        }
    }
    Shape out_shape = ids_shape;
    out_shape.push_back(ts[1]);
    const auto ti = table.id();
    return table.tape().record(OpKind::gather, {ti}, Tensor<S>(out_shape, std::move(y)),
        [ti, idv = std::vector<std::int32_t>(ids.begin(), ids.end())](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* gt = t.grad_slot(ti)) {
                for (std::size_t i = 0; i < idv.size(); ++i) {
                    if (idv[i] >= 0) gt->row(idv[i]) += dy.row(static_cast<Index>(i));
                }
            }
        });
}

template <class S>
Var<S> dropout(const Var<S>& x, double drop_prob, std::uint64_t seed, bool training)
{
    if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
        throw ConfigError("dropout: probability " + std::to_string(drop_prob) + " outside [0, 1)");
    }
    if (!training || drop_prob == 0.0) return x;
    std::mt19937_64 rng(seed);
    const S keep_scale = S(1.0 / (1.0 - drop_prob));
    Matrix<S> keep(x.value().rows(), x.value().cols());
    for (Index i = 0; i < keep.size(); ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        keep.data()[i] = u < drop_prob ? S(0) : keep_scale;
    }
    Matrix<S> y = x.value().matrix().cwiseProduct(keep);
    const auto xi = x.id();
    return x.tape().record(OpKind::dropout, {xi}, Tensor<S>(x.shape(), std::move(y)),
        [xi, keep = std::move(keep)](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* gx = t.grad_slot(xi)) *gx += dy.cwiseProduct(keep);
        });
}

template <class S>
Var<S> batched_matmul(const Var<S>& a, const Var<S>& b, bool transpose_b)
{
    detail::check_same_tape(a, b, "batched_matmul");
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 3 || bs.size() != 3 || as[0] != bs[0]) detail::shape_mismatch("batched_matmul", as, bs);
    const Index batch = as[0], n = as[1], k = as[2];
    const Index bk = transpose_b ? bs[2] : bs[1];
    const Index m = transpose_b ? bs[1] : bs[2];
    if (bk != k) detail::shape_mismatch("batched_matmul", as, bs);
    const Index brows = bs[1];

    const auto& av = a.value().matrix();
    const auto& bv = b.value().matrix();
    Matrix<S> y(batch * n, m);
    for (Index i = 0; i < batch; ++i) {
        if (transpose_b) {
            y.middleRows(i * n, n).noalias() = av.middleRows(i * n, n) * bv.middleRows(i * brows, brows).transpose();
        } else {
            y.middleRows(i * n, n).noalias() = av.middleRows(i * n, n) * bv.middleRows(i * brows, brows);
        }
    }
    const auto ai = a.id(), bi = b.id();
    return a.tape().record(OpKind::batched_matmul, {ai, bi}, Tensor<S>({batch, n, m}, std::move(y)),
        [ai, bi, batch, n, brows, transpose_b](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            const auto& av = t.value(ai).matrix();
            const auto& bv = t.value(bi).matrix();
            auto* ga = t.grad_slot(ai);
            auto* gb = t.grad_slot(bi);
            for (Index i = 0; i < batch; ++i) {
                const auto dyi = dy.middleRows(i * n, n);
                const auto ai_blk = av.middleRows(i * n, n);
                const auto bi_blk = bv.middleRows(i * brows, brows);
                if (transpose_b) {
                    if (ga) ga->middleRows(i * n, n).noalias() += dyi * bi_blk;
                    if (gb) gb->middleRows(i * brows, brows).noalias() += dyi.transpose() * ai_blk;
                } else {
                    if (ga) ga->middleRows(i * n, n).noalias() += dyi * bi_blk.transpose();
                    if (gb) gb->middleRows(i * brows, brows).noalias() += ai_blk.transpose() * dyi;
                }
            }
        });
}

template <class S>
Var<S> slice_last(const Var<S>& x, Index start, Index len)
{
    const Index d = x.shape().back();
    if (start < 0 || len <= 0 || start + len > d) {
        throw ShapeError("slice: columns [" + std::to_string(start) + ", " + std::to_string(start + len)
                         + ") outside shape " + shape_str(x.shape()));
    }
    Shape out_shape = x.shape();
    out_shape.back() = len;
    Matrix<S> y = x.value().matrix().middleCols(start, len);
    const auto xi = x.id();
    return x.tape().record(OpKind::slice, {xi}, Tensor<S>(out_shape, std::move(y)),
        [xi, start, len](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* gx = t.grad_slot(xi)) gx->middleCols(start, len) += dy;
        });
}

template <class S>
Var<S> concat_last(std::span<const Var<S>> parts)
{
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Shape lead = parts[0].shape();
    lead.pop_back();
    Index total = 0;
    std::vector<std::size_t> ids;
    std::vector<Index> widths;
    for (const auto& p : parts) {
        detail::check_same_tape(parts[0], p, "concat");
        Shape pl = p.shape();
        pl.pop_back();
        if (pl != lead) detail::shape_mismatch("concat", parts[0].shape(), p.shape());
        ids.push_back(p.id());
        widths.push_back(p.shape().back());
        total += p.shape().back();
    }
    Matrix<S> y(parts[0].value().rows(), total);
    Index col = 0;
    for (const auto& p : parts) {
        y.middleCols(col, p.shape().back()) = p.value().matrix();
        col += p.shape().back();
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    return parts[0].tape().record(OpKind::concat, ids, Tensor<S>(out_shape, std::move(y)),
        [ids, widths](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            Index c = 0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (auto* g = t.grad_slot(ids[i])) *g += dy.middleCols(c, widths[i]);
                c += widths[i];
            }
        });
}

template <class S>
Var<S> sum(const Var<S>& x)
{
    const auto xi = x.id();
    return x.tape().record(OpKind::sum, {xi}, Tensor<S>::scalar(x.value().matrix().sum()),
        [xi](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* gx = t.grad_slot(xi)) gx->array() += dy(0, 0);
        });
}

template <class S>
Var<S> mean_square(const Var<S>& pred, const Tensor<S>& target, std::span<const std::uint8_t> row_mask)
{
    if (pred.shape() != target.shape()) detail::shape_mismatch("mean_square", pred.shape(), target.shape());
    const Index rows = pred.value().rows();
    const Index k = pred.value().cols();
    if (static_cast<Index>(row_mask.size()) != rows) {
        throw ShapeError("mean_square: mask of " + std::to_string(row_mask.size()) + " rows for shape "
                         + shape_str(pred.shape()));
    }
    Index valid = 0;
    S total = 0;
    Matrix<S> diff = pred.value().matrix() - target.matrix();
    for (Index r = 0; r < rows; ++r) {
        if (row_mask[r]) {
            ++valid;
            total += diff.row(r).squaredNorm();
        } else {
            diff.row(r).setZero();
        }
    }
    const S denom = valid ? S(valid) * S(k) : S(1);
    const auto pi = pred.id();
    return pred.tape().record(OpKind::mean_square, {pi}, Tensor<S>::scalar(valid ? total / denom : S(0)),
        [pi, diff = std::move(diff), denom](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* gp = t.grad_slot(pi)) *gp += diff * (S(2) * dy(0, 0) / denom);
        });
}

template <class S>
Var<S> binary_cross_entropy(const Var<S>& prob, std::span<const std::uint8_t> labels,
                            std::span<const std::uint8_t> row_mask)
{
    const auto& pv = prob.value().matrix();
    if (pv.cols() != 1) throw ShapeError("binary_cross_entropy: last extent must be 1, got " + shape_str(prob.shape()));
    const Index rows = pv.rows();
    if (static_cast<Index>(labels.size()) != rows || static_cast<Index>(row_mask.size()) != rows) {
        throw ShapeError("binary_cross_entropy: labels/mask do not match shape " + shape_str(prob.shape()));
    }
    Index valid = 0;
    S total = 0;
    Matrix<S> dprob = Matrix<S>::Zero(rows, 1);
    for (Index r = 0; r < rows; ++r) {
        if (!row_mask[r]) continue;
        ++valid;
        const S raw = pv(r, 0);
        const S p = detail::clamp_probability(raw);
        const bool y = labels[r] != 0;
        total -= y ? std::log(p) : std::log(S(1) - p);
        if (p == raw) dprob(r, 0) = y ? -S(1) / p : S(1) / (S(1) - p);
    }
    const S n = valid ? S(valid) : S(1);
    dprob /= n;
    const auto pi = prob.id();
    return prob.tape().record(OpKind::binary_cross_entropy, {pi}, Tensor<S>::scalar(valid ? total / n : S(0)),
        [pi, dprob = std::move(dprob)](Tape<S>& t, std::size_t, const Matrix<S>& dy) {
            if (auto* gp = t.grad_slot(pi)) *gp += dprob * dy(0, 0);
        });
}

} // namespace skillkt
