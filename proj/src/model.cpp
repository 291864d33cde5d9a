#include "skillkt/model.hpp"

namespace skillkt {

void ModelConfig::validate() const
{
    if (d_model < 1) throw ConfigError("d_model must be >= 1");
    if (n_heads < 1 || d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
    if (n_encoder_layers < 0 || n_decoder_layers < 0) throw ConfigError("layer counts must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (skill_dim < 1) throw ConfigError("skill_dim must be >= 1");
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (feedforward_dim < 1) throw ConfigError("feedforward_dim must be >= 1");
    if (projection_hidden < 0) throw ConfigError("projection_hidden must be >= 0");
}

template class KTModel<float>;
template class KTModel<double>;

} // namespace skillkt
