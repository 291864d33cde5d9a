#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "skillkt/autodiff.hpp"
#include "skillkt/dataset.hpp"
#include "skillkt/embedding_table.hpp"
#include "skillkt/parameters.hpp"

namespace skillkt {

struct ModelConfig
{
    int d_model = 100;
    int n_heads = 1;
    int n_encoder_layers = 4;
    int n_decoder_layers = 4;
    double dropout = 0.05;
    int skill_dim = 25;
    int max_len = 200;
    double lambda = 1.0;       ///< projection-loss weight
    int feedforward_dim = 400;
    int projection_hidden = 0; ///< 0: single affine projection; > 0: affine-ReLU-affine

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

enum class Mode
{
    train,
    eval
};

/// Parameter initialisation: embeddings ~ N(0, 1/√d_model), linear weights Glorot-uniform, biases 0, norms (1, 0).
template <class Scalar>
ParameterMap<Scalar> init_parameters(const ModelConfig& config, NodeId n_problems, std::uint64_t seed);

template <class Scalar>
struct ForwardOutput
{
    Var<Scalar> probability;                ///< r̂, [batch, length, 1]
    std::optional<Var<Scalar>> projection;  ///< p', [batch, length, skill_dim]
};

/**
 * Encoder-decoder attention model for next-response prediction.
 *
 * The encoder reads problem embeddings; the decoder reads the shifted
 * interaction embeddings and attends to the encoder. Every attention site is
 * causal, so the prediction at position i depends only on problems 0..i and
 * responses 0..i-1. A side projection maps raw problem embeddings to the skill
 * vector space.
 */
template <class Scalar>
class KTModel
{
public:
    using Bound = std::map<std::string, Var<Scalar>>;

    KTModel(const ModelConfig& config, NodeId n_problems, std::uint64_t seed);
    /// Adopts existing parameters; names and shapes must match the config.
    KTModel(const ModelConfig& config, NodeId n_problems, ParameterMap<Scalar> params);

    const ModelConfig& config() const noexcept { return config_; }
    NodeId n_problems() const noexcept { return n_problems_; }
    ParameterMap<Scalar>& parameters() noexcept { return params_; }
    const ParameterMap<Scalar>& parameters() const noexcept { return params_; }

    /// Records every parameter as a leaf on `tape`.
    Bound bind(Tape<Scalar>& tape, bool requires_grad) const;

    /// Dropout masks in train mode derive from `dropout_seed`.
    ForwardOutput<Scalar> forward(Tape<Scalar>& tape, const Bound& params, const Batch& batch, Mode mode,
                                  std::uint64_t dropout_seed, bool with_projection) const;

    /// Eval-mode r̂ as a [batch, length] matrix.
    Matrix<Scalar> predict(const Batch& batch) const;

private:
    ModelConfig config_;
    NodeId n_problems_;
    ParameterMap<Scalar> params_;
};

/// Masked BCE of r̂ against the batch labels.
template <class Scalar>
Var<Scalar> kt_loss(const Var<Scalar>& probability, const Batch& batch);

/// Mean over valid positions of ‖p' − s_π‖² / skill_dim; the skill table is a constant.
template <class Scalar>
Var<Scalar> projection_loss(const Var<Scalar>& projection, const EmbeddingTable& skills, const Batch& batch);

template <class Scalar>
Var<Scalar> total_loss(const Var<Scalar>& kt, const Var<Scalar>& projection, Scalar lambda)
{
    return add(kt, scale(projection, lambda));
}

inline double total_loss(double kt, double projection, double lambda) { return kt + lambda * projection; }

extern template class KTModel<float>;
extern template class KTModel<double>;

} // namespace skillkt

#include "skillkt/model_impl.hpp"
