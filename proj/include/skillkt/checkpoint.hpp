#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "skillkt/adam.hpp"
#include "skillkt/model.hpp"

namespace skillkt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error
{
public:
    using Error::Error;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/**
 * Scalar-independent checkpoint contents. Tensors are stored as float64 so a
 * float32 model round-trips exactly.
 */
struct CheckpointData
{
    std::string scalar = "float32";
    ModelConfig model_config;
    NodeId n_problems = 0;
    int epoch = 0;
    ParameterMap<double> parameters;
    bool has_optimizer = false;
    AdamConfig adam_config;
    std::int64_t adam_step = 0;
    ParameterMap<double> adam_first_moment;
    ParameterMap<double> adam_second_moment;
    nlohmann::json meta = nlohmann::json::object();  ///< config echo, skill labels, ...
};

template <class Scalar>
constexpr const char* scalar_name()
{
    return sizeof(Scalar) == 4 ? "float32" : "float64";
}

template <class Scalar>
CheckpointData make_checkpoint(const KTModel<Scalar>& model, const AdamState<Scalar>* adam, int epoch,
                               nlohmann::json meta)
{
    CheckpointData data;
    data.scalar = scalar_name<Scalar>();
    data.model_config = model.config();
    data.n_problems = model.n_problems();
    data.epoch = epoch;
    data.meta = std::move(meta);
    for (const auto& [name, t] : model.parameters()) data.parameters.emplace(name, t.template cast<double>());
    if (adam) {
        data.has_optimizer = true;
        data.adam_config = adam->config;
        data.adam_step = adam->step;
        for (const auto& [name, m] : adam->first_moment) {
            const auto& shape = model.parameters().at(name).shape();
            data.adam_first_moment.emplace(name, Tensor<double>(shape, m.template cast<double>()));
            data.adam_second_moment.emplace(name, Tensor<double>(shape, adam->second_moment.at(name).template cast<double>()));
        }
    }
    return data;
}

template <class Scalar>
KTModel<Scalar> model_from_checkpoint(const CheckpointData& data)
{
    ParameterMap<Scalar> params;
    for (const auto& [name, t] : data.parameters) params.emplace(name, t.template cast<Scalar>());
    return KTModel<Scalar>(data.model_config, data.n_problems, std::move(params));
}

template <class Scalar>
AdamState<Scalar> adam_from_checkpoint(const CheckpointData& data)
{
    AdamState<Scalar> state;
    if (!data.has_optimizer) return state;
    state.config = data.adam_config;
    state.step = data.adam_step;
    for (const auto& [name, t] : data.adam_first_moment) state.first_moment.emplace(name, t.matrix().template cast<Scalar>());
    for (const auto& [name, t] : data.adam_second_moment) state.second_moment.emplace(name, t.matrix().template cast<Scalar>());
    return state;
}

/// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const CheckpointData& data, const std::filesystem::path& path);

/// Throws CheckpointError on bad magic, unknown version, truncation, or checksum mismatch.
CheckpointData load_checkpoint(const std::filesystem::path& path);

} // namespace skillkt
