#include "skillkt/trainer.hpp"

namespace skillkt {

void TrainConfig::validate() const
{
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
}

template ExperimentResult train<float>(KTModel<float>&, std::span<const Batch>, std::span<const Batch>,
                                       const EmbeddingTable*, const TrainConfig&, AdamState<float>*,
                                       const TrainCallbacks<float>&);
template ExperimentResult train<double>(KTModel<double>&, std::span<const Batch>, std::span<const Batch>,
                                        const EmbeddingTable*, const TrainConfig&, AdamState<double>*,
                                        const TrainCallbacks<double>&);

} // namespace skillkt
