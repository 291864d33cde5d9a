#pragma once

// Template definitions for model.hpp.

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace skillkt {

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// 0 on and below the diagonal, -inf above.
template <class S>
Tensor<S> causal_mask(Index length)
{
    Tensor<S> mask({length, length});
    for (Index i = 0; i < length; ++i) {
        for (Index j = i + 1; j < length; ++j) mask.matrix()(i, j) = -std::numeric_limits<S>::infinity();
    }
    return mask;
}

} // namespace detail

template <class Scalar>
ParameterMap<Scalar> init_parameters(const ModelConfig& config, NodeId n_problems, std::uint64_t seed)
{
    config.validate();
    if (n_problems < 1) throw ConfigError("model needs at least one problem");
    ParameterMap<Scalar> params;
    std::mt19937_64 rng(seed);
    const Index d = config.d_model;

    auto embedding = [&](const std::string& name, Index rows) {
        std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
        Tensor<Scalar> t({rows, d});
        for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(normal(rng));
        params.emplace(name, std::move(t));
    };
    auto linear = [&](const std::string& prefix, Index in, Index out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        Tensor<Scalar> w({in, out});
        for (Index i = 0; i < w.size(); ++i) w[i] = static_cast<Scalar>(uniform(rng));
        params.emplace(prefix + ".weight", std::move(w));
        params.emplace(prefix + ".bias", Tensor<Scalar>({out}));
    };
    auto norm = [&](const std::string& prefix) {
        Tensor<Scalar> gamma({d});
        gamma.matrix().setOnes();
        params.emplace(prefix + ".gamma", std::move(gamma));
        params.emplace(prefix + ".beta", Tensor<Scalar>({d}));
    };
    auto attention = [&](const std::string& prefix) {
        for (const char* part : {".q", ".k", ".v", ".o"}) linear(prefix + part, d, d);
    };
    auto feedforward = [&](const std::string& prefix) {
        linear(prefix + ".ff1", d, config.feedforward_dim);
        linear(prefix + ".ff2", config.feedforward_dim, d);
    };

    embedding("problem_embedding", n_problems);
    embedding("interaction_embedding", 2 * Index{n_problems} + 1);
    embedding("position_embedding", config.max_len);
    for (int i = 0; i < config.n_encoder_layers; ++i) {
        const std::string pre = "encoder." + std::to_string(i);
        norm(pre + ".norm1");
        attention(pre + ".self_attn");
        norm(pre + ".norm2");
        feedforward(pre);
    }
    norm("encoder.norm");
    for (int i = 0; i < config.n_decoder_layers; ++i) {
        const std::string pre = "decoder." + std::to_string(i);
        norm(pre + ".norm1");
        attention(pre + ".self_attn");
        norm(pre + ".norm2");
        attention(pre + ".cross_attn");
        norm(pre + ".norm3");
        feedforward(pre);
    }
    norm("decoder.norm");
    if (config.projection_hidden > 0) {
        linear("projection.hidden", d, config.projection_hidden);
        linear("projection.out", config.projection_hidden, config.skill_dim);
    } else {
        linear("projection", d, config.skill_dim);
    }
    linear("head", d, 1);
    return params;
}

template <class Scalar>
KTModel<Scalar>::KTModel(const ModelConfig& config, NodeId n_problems, std::uint64_t seed)
    : config_(config)
    , n_problems_(n_problems)
    , params_(init_parameters<Scalar>(config, n_problems, seed))
{}

template <class Scalar>
KTModel<Scalar>::KTModel(const ModelConfig& config, NodeId n_problems, ParameterMap<Scalar> params)
    : config_(config)
    , n_problems_(n_problems)
    , params_(std::move(params))
{
    const auto expected = init_parameters<Scalar>(config, n_problems, 0);
    if (expected.size() != params_.size()) {
        throw ConfigError("model expects " + std::to_string(expected.size()) + " parameter tensors, got "
                          + std::to_string(params_.size()));
    }
    for (const auto& [name, t] : expected) {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
        if (it->second.shape() != t.shape()) {
            throw ShapeError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) + ", expected "
                             + shape_str(t.shape()));
        }
    }
}

template <class Scalar>
typename KTModel<Scalar>::Bound KTModel<Scalar>::bind(Tape<Scalar>& tape, bool requires_grad) const
{
    Bound bound;
    for (const auto& [name, t] : params_) bound.emplace(name, tape.leaf(t, requires_grad));
    return bound;
}

template <class Scalar>
ForwardOutput<Scalar> KTModel<Scalar>::forward(Tape<Scalar>& tape, const Bound& params, const Batch& batch,
                                               Mode mode, std::uint64_t dropout_seed, bool with_projection) const
{
    using V = Var<Scalar>;
    const Index B = batch.batch_size;
    const Index L = batch.length;
    if (B < 1 || L < 1) throw ShapeError("forward: empty batch");
    if (params.empty() || &params.begin()->second.tape() != &tape) {
        throw Error("forward: parameters are not bound to this tape");
    }
    if (L > config_.max_len) {
        throw ConfigError("forward: sequence length " + std::to_string(L) + " exceeds max_len "
                          + std::to_string(config_.max_len));
    }
    const bool training = mode == Mode::train;
    std::uint64_t site = 0;

    auto at = [&](const std::string& name) -> const V& {
        auto it = params.find(name);
        if (it == params.end()) throw ConfigError("forward: unbound parameter '" + name + "'");
        return it->second;
    };
    auto drop = [&](const V& x) {
        return dropout(x, config_.dropout, detail::mix_seed(dropout_seed + ++site), training);
    };
    auto linear = [&](const V& x, const std::string& prefix) {
        return add(matmul(x, at(prefix + ".weight")), at(prefix + ".bias"));
    };
    auto norm = [&](const V& x, const std::string& prefix) {
        return layer_norm(x, at(prefix + ".gamma"), at(prefix + ".beta"));
    };

    const Tensor<Scalar> mask = detail::causal_mask<Scalar>(L);
    const Index head_dim = config_.d_model / config_.n_heads;
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));

    auto attention = [&](const V& query_in, const V& memory_in, const std::string& prefix) {
        const V q = linear(query_in, prefix + ".q");
        const V k = linear(memory_in, prefix + ".k");
        const V v = linear(memory_in, prefix + ".v");
        std::vector<V> heads;
        for (int h = 0; h < config_.n_heads; ++h) {
            const bool whole = config_.n_heads == 1;
            const V qh = whole ? q : slice_last(q, h * head_dim, head_dim);
            const V kh = whole ? k : slice_last(k, h * head_dim, head_dim);
            const V vh = whole ? v : slice_last(v, h * head_dim, head_dim);
            const V weights = softmax(scale(batched_matmul(qh, kh, true), inv_sqrt), &mask);
            heads.push_back(batched_matmul(weights, vh));
        }
        const V context = heads.size() == 1 ? heads[0] : concat_last<Scalar>(heads);
        return linear(context, prefix + ".o");
    };
    auto feedforward = [&](const V& x, const std::string& prefix) {
        return linear(drop(relu(linear(x, prefix + ".ff1"))), prefix + ".ff2");
    };

    std::vector<std::int32_t> positions(static_cast<std::size_t>(L));
    std::iota(positions.begin(), positions.end(), 0);
    const V pos = gather(at("position_embedding"), positions, {L});
    const V problems = gather(at("problem_embedding"), batch.encoder_ids, {B, L});

    V x = drop(add(problems, pos));
    for (int i = 0; i < config_.n_encoder_layers; ++i) {
        const std::string pre = "encoder." + std::to_string(i);
        const V h = norm(x, pre + ".norm1");
        x = add(x, drop(attention(h, h, pre + ".self_attn")));
        x = add(x, drop(feedforward(norm(x, pre + ".norm2"), pre)));
    }
    const V memory = norm(x, "encoder.norm");

    V y = drop(add(gather(at("interaction_embedding"), batch.decoder_ids, {B, L}), pos));
    for (int i = 0; i < config_.n_decoder_layers; ++i) {
        const std::string pre = "decoder." + std::to_string(i);
        const V h = norm(y, pre + ".norm1");
        y = add(y, drop(attention(h, h, pre + ".self_attn")));
        y = add(y, drop(attention(norm(y, pre + ".norm2"), memory, pre + ".cross_attn")));
        y = add(y, drop(feedforward(norm(y, pre + ".norm3"), pre)));
    }
    y = norm(y, "decoder.norm");

    ForwardOutput<Scalar> out;
    out.probability = sigmoid(linear(y, "head"));
    if (with_projection) {
        out.projection = config_.projection_hidden > 0
                             ? linear(relu(linear(problems, "projection.hidden")), "projection.out")
                             : linear(problems, "projection");
    }
    return out;
}

template <class Scalar>
Matrix<Scalar> KTModel<Scalar>::predict(const Batch& batch) const
{
    Tape<Scalar> tape;
    const auto bound = bind(tape, false);
    const auto out = forward(tape, bound, batch, Mode::eval, 0, false);
    return Eigen::Map<const Matrix<Scalar>>(out.probability.value().data(), batch.batch_size, batch.length);
}

template <class Scalar>
Var<Scalar> kt_loss(const Var<Scalar>& probability, const Batch& batch)
{
    return binary_cross_entropy(probability, batch.labels, batch.mask);
}

template <class Scalar>
Var<Scalar> projection_loss(const Var<Scalar>& projection, const EmbeddingTable& skills, const Batch& batch)
{
    const Index k = projection.shape().back();
    if (skills.dim() != k) {
        throw ShapeError("projection loss: skill vectors have dim " + std::to_string(skills.dim())
                         + ", projection produces " + std::to_string(k));
    }
    Tensor<Scalar> target(projection.shape());
    for (std::size_t r = 0; r < batch.encoder_ids.size(); ++r) {
        if (!batch.mask[r]) continue;
        const auto id = batch.encoder_ids[r];
        if (id < 0 || id >= skills.count()) throw RangeError("projection loss: no skill vector for problem " + std::to_string(id));
        target.matrix().row(static_cast<Index>(r)) = skills.vectors.row(id).template cast<Scalar>();
    }
    return mean_square(projection, target, batch.mask);
}

} // namespace skillkt
