#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "skillkt/adam.hpp"
#include "skillkt/metrics.hpp"
#include "skillkt/model.hpp"

namespace skillkt {

struct TrainConfig
{
    int epochs = 100;
    int batch_size = 64;
    double learning_rate = 2e-4;
    int patience = 10;  ///< epochs without eval-AUC improvement before stopping
    std::uint64_t seed = 0;
    int eval_every = 1;

    void validate() const;
};

struct EpochMetrics
{
    int epoch = 0;
    double train_kt_loss = 0.0;
    std::optional<double> train_projection_loss;  ///< only when λ > 0
    std::optional<double> eval_auc;
};

struct ExperimentResult
{
    std::vector<EpochMetrics> epochs;
    double best_auc = std::numeric_limits<double>::quiet_NaN();
    int best_epoch = 0;
    double final_auc = std::numeric_limits<double>::quiet_NaN();
    int epochs_run = 0;
    std::uint64_t seed = 0;
    std::string config_echo;
    double wall_clock_seconds = 0.0;
};

/// Thrown when a loss or gradient goes non-finite; the model keeps its last finite parameters.
class TrainingAborted : public NumericalError
{
public:
    TrainingAborted(const std::string& what, ExperimentResult partial)
        : NumericalError(what)
        , partial_(std::move(partial))
    {}

    const ExperimentResult& partial() const noexcept { return partial_; }

private:
    ExperimentResult partial_;
};

template <class Scalar>
struct TrainCallbacks
{
    /// Called after every epoch; `improved` is true when eval AUC reached a new best.
    std::function<void(const KTModel<Scalar>&, const AdamState<Scalar>&, const EpochMetrics&, bool improved)> on_epoch;
    /// Checked after on_epoch; returning true ends training as if the epoch budget ran out.
    std::function<bool(const KTModel<Scalar>&, const EpochMetrics&)> stop;
};

struct PooledPredictions
{
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
};

/// Eval-mode predictions at every valid position, in batch order.
template <class Scalar>
PooledPredictions pool_predictions(const KTModel<Scalar>& model, std::span<const Batch> batches)
{
    PooledPredictions pooled;
    for (const auto& batch : batches) {
        const Matrix<Scalar> probs = model.predict(batch);
        for (Index s = 0; s < batch.batch_size; ++s) {
            for (Index i = 0; i < batch.length; ++i) {
                const auto cell = static_cast<std::size_t>(s * batch.length + i);
                if (!batch.mask[cell]) continue;
                pooled.scores.push_back(static_cast<double>(probs(s, i)));
                pooled.labels.push_back(batch.labels[cell]);
            }
        }
    }
    return pooled;
}

/// Pooled AUC over every valid position.
template <class Scalar>
double evaluate(const KTModel<Scalar>& model, std::span<const Batch> batches)
{
    const auto pooled = pool_predictions(model, batches);
    return auc(pooled.scores, pooled.labels);
}

/**
 * Minimises L_k + λ·L_p with Adam, shuffling batch order each epoch.
 *
 * Evaluates every `eval_every` epochs (and at the last one), keeps the
 * best-AUC parameters and restores them at the end, and stops after
 * `patience` epochs without improvement. `skills` is required when λ > 0 and
 * is never touched otherwise.
 */
template <class Scalar>
ExperimentResult train(KTModel<Scalar>& model, std::span<const Batch> train_batches,
                       std::span<const Batch> eval_batches, const EmbeddingTable* skills, const TrainConfig& config,
                       AdamState<Scalar>* state = nullptr, const TrainCallbacks<Scalar>& callbacks = {})
{
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    if (train_batches.empty()) throw ConfigError("train: no training batches");
    const double lambda = model.config().lambda;
    const bool use_projection = lambda > 0.0;
    if (use_projection) {
        if (!skills) throw ConfigError("train: lambda > 0 requires skill vectors");
        if (skills->dim() != model.config().skill_dim) {
            throw ConfigError("train: skill vectors have dim " + std::to_string(skills->dim()) + ", model expects "
                              + std::to_string(model.config().skill_dim));
        }
        if (skills->count() != model.n_problems()) {
            throw ConfigError("train: " + std::to_string(skills->count()) + " skill vectors for "
                              + std::to_string(model.n_problems()) + " skills");
        }
    }

    AdamState<Scalar> local_state;
    AdamState<Scalar>& adam = state ? *state : local_state;
    adam.config.learning_rate = config.learning_rate;

    ExperimentResult result;
    result.seed = config.seed;
    std::mt19937_64 rng(config.seed);
    ParameterMap<Scalar> best_params;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(train_batches.size());

    auto abort = [&](const std::string& why) {
        result.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        throw TrainingAborted(why, result);
    };

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
        }

        double kt_sum = 0.0, proj_sum = 0.0, weight = 0.0;
        for (auto b : order) {
            const Batch& batch = train_batches[b];
            Tape<Scalar> tape;
            const auto bound = model.bind(tape, true);
            const auto out = model.forward(tape, bound, batch, Mode::train, rng(), use_projection);
            const auto lk = kt_loss(out.probability, batch);
            auto loss = lk;
            double lp_value = 0.0;
            if (use_projection) {
                const auto lp = projection_loss(*out.projection, *skills, batch);
                lp_value = static_cast<double>(lp.value().item());
                loss = total_loss(lk, lp, static_cast<Scalar>(lambda));
            }
            if (!std::isfinite(static_cast<double>(loss.value().item()))) {
                abort("non-finite loss at epoch " + std::to_string(epoch));
            }
            tape.backward(loss);
            ParameterMap<Scalar> grads;
            for (const auto& [name, var] : bound) grads.emplace(name, tape.gradient(var));
            try {
                adam_step(model.parameters(), grads, adam);
            } catch (const NumericalError& e) {
                abort(std::string(e.what()) + " at epoch " + std::to_string(epoch));
            }
            const double w = static_cast<double>(batch.valid_count());
            kt_sum += w * static_cast<double>(lk.value().item());
            proj_sum += w * lp_value;
            weight += w;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_kt_loss = weight > 0 ? kt_sum / weight : 0.0;
        if (use_projection) m.train_projection_loss = weight > 0 ? proj_sum / weight : 0.0;

        bool improved = false;
        const bool eval_now = !eval_batches.empty() && (epoch % config.eval_every == 0 || epoch == config.epochs);
        if (eval_now) {
            m.eval_auc = evaluate(model, eval_batches);
            result.final_auc = *m.eval_auc;
            if (*m.eval_auc > best) {
                best = *m.eval_auc;
                best_params = model.parameters();
                result.best_epoch = epoch;
                improved = true;
            }
        }
        result.epochs.push_back(m);
        result.epochs_run = epoch;
        if (callbacks.on_epoch) callbacks.on_epoch(model, adam, m, improved);
        if (callbacks.stop && callbacks.stop(model, m)) break;
        if (eval_now && epoch - result.best_epoch >= config.patience) break;
    }

    if (!best_params.empty()) {
        model.parameters() = std::move(best_params);
        result.best_auc = best;
    }
    result.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

} // namespace skillkt
