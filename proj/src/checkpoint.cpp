#include "skillkt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace skillkt {

namespace {

constexpr char kMagic[8] = {'S', 'K', 'K', 'T', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void append_group(const ParameterMap<double>& group, const std::string& kind, nlohmann::json& index,
                  std::string& payload)
{
    for (const auto& [name, t] : group) {
        index.push_back({{"name", name}, {"group", kind}, {"shape", t.shape()}, {"offset", payload.size()}});
        payload.append(reinterpret_cast<const char*>(t.data()), static_cast<std::size_t>(t.size()) * sizeof(double));
    }
}

} // namespace

nlohmann::json to_json(const ModelConfig& c)
{
    return {
        {"d_model", c.d_model},
        {"n_heads", c.n_heads},
        {"n_encoder_layers", c.n_encoder_layers},
        {"n_decoder_layers", c.n_decoder_layers},
        {"dropout", c.dropout},
        {"skill_dim", c.skill_dim},
        {"max_len", c.max_len},
        {"lambda", c.lambda},
        {"feedforward_dim", c.feedforward_dim},
        {"projection_hidden", c.projection_hidden},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j)
{
    ModelConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_encoder_layers = j.at("n_encoder_layers").get<int>();
    c.n_decoder_layers = j.at("n_decoder_layers").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.skill_dim = j.at("skill_dim").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.lambda = j.at("lambda").get<double>();
    c.feedforward_dim = j.at("feedforward_dim").get<int>();
    c.projection_hidden = j.at("projection_hidden").get<int>();
    c.validate();
    return c;
}

void save_checkpoint(const CheckpointData& data, const std::filesystem::path& path)
{
    std::string payload;
    nlohmann::json index = nlohmann::json::array();
    append_group(data.parameters, "param", index, payload);
    if (data.has_optimizer) {
        append_group(data.adam_first_moment, "adam_m", index, payload);
        append_group(data.adam_second_moment, "adam_v", index, payload);
    }

    nlohmann::json header = {
        {"format", "skillkt-checkpoint"},
        {"version", kCheckpointVersion},
        {"scalar", data.scalar},
        {"model_config", to_json(data.model_config)},
        {"n_problems", data.n_problems},
        {"epoch", data.epoch},
        {"tensors", index},
        {"payload_bytes", payload.size()},
        {"payload_fnv1a", fnv1a(payload)},
        {"meta", data.meta},
    };
    if (data.has_optimizer) {
        header["optimizer"] = {
            {"kind", "adam"},
            {"step", data.adam_step},
            {"learning_rate", data.adam_config.learning_rate},
            {"beta1", data.adam_config.beta1},
            {"beta2", data.adam_config.beta2},
            {"epsilon", data.adam_config.epsilon},
        };
    }
    const std::string header_text = header.dump();

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
        const std::uint32_t version = kCheckpointVersion;
        const std::uint64_t header_len = header_text.size();
        out.write(kMagic, sizeof kMagic);
        out.write(reinterpret_cast<const char*>(&version), sizeof version);
        out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
        out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw CheckpointError("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

CheckpointData load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    const std::string where = "checkpoint '" + path.string() + "': ";

    constexpr std::size_t fixed = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
    if (bytes.size() < fixed || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw CheckpointError(where + "not a skillkt checkpoint (bad magic)");
    }
    std::uint32_t version = 0;
    std::uint64_t header_len = 0;
    std::memcpy(&version, bytes.data() + sizeof kMagic, sizeof version);
    std::memcpy(&header_len, bytes.data() + sizeof kMagic + sizeof version, sizeof header_len);
    if (version != kCheckpointVersion) {
        throw CheckpointError(where + "unsupported format version " + std::to_string(version) + " (expected "
                              + std::to_string(kCheckpointVersion) + ")");
    }
    if (header_len > bytes.size() - fixed) throw CheckpointError(where + "truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(fixed, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(where + "corrupt header: " + e.what());
    }
    const std::string payload = bytes.substr(fixed + header_len);

    CheckpointData data;
    try {
        if (header.at("format") != "skillkt-checkpoint") throw CheckpointError(where + "unknown format tag");
        if (header.at("payload_bytes").get<std::size_t>() != payload.size()) {
            throw CheckpointError(where + "payload is " + std::to_string(payload.size()) + " bytes, header declares "
                                  + std::to_string(header.at("payload_bytes").get<std::size_t>()));
        }
        if (header.at("payload_fnv1a").get<std::uint64_t>() != fnv1a(payload)) {
            throw CheckpointError(where + "payload checksum mismatch");
        }
        data.scalar = header.at("scalar").get<std::string>();
        data.model_config = model_config_from_json(header.at("model_config"));
        data.n_problems = header.at("n_problems").get<NodeId>();
        data.epoch = header.at("epoch").get<int>();
        data.meta = header.value("meta", nlohmann::json::object());
        if (header.contains("optimizer")) {
            const auto& opt = header["optimizer"];
            data.has_optimizer = true;
            data.adam_step = opt.at("step").get<std::int64_t>();
            data.adam_config.learning_rate = opt.at("learning_rate").get<double>();
            data.adam_config.beta1 = opt.at("beta1").get<double>();
            data.adam_config.beta2 = opt.at("beta2").get<double>();
            data.adam_config.epsilon = opt.at("epsilon").get<double>();
        }
        for (const auto& entry : header.at("tensors")) {
            const auto shape = entry.at("shape").get<Shape>();
            const auto offset = entry.at("offset").get<std::size_t>();
            Tensor<double> t(shape);
            const std::size_t n = static_cast<std::size_t>(t.size()) * sizeof(double);
            if (offset > payload.size() || n > payload.size() - offset) {
                throw CheckpointError(where + "tensor '" + entry.at("name").get<std::string>() + "' out of bounds");
            }
            std::memcpy(t.data(), payload.data() + offset, n);
            const auto group = entry.at("group").get<std::string>();
            auto& target = group == "param" ? data.parameters
                           : group == "adam_m" ? data.adam_first_moment
                                               : data.adam_second_moment;
            target.emplace(entry.at("name").get<std::string>(), std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(where + "malformed header: " + e.what());
    } catch (const CheckpointError&) {
        throw;
    } catch (const Error& e) {
        throw CheckpointError(where + e.what());
    }
    return data;
}

} // namespace skillkt
