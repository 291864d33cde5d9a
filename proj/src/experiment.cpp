#include "skillkt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

namespace skillkt {

std::string arm_name(Arm arm)
{
    switch (arm) {
    case Arm::ours: return "ours";
    case Arm::no_projection: return "noproj";
    case Arm::random_graph: return "random";
    }
    return "unknown";
}

Arm parse_arm(const std::string& name)
{
    if (name == "ours") return Arm::ours;
    if (name == "noproj") return Arm::no_projection;
    if (name == "random") return Arm::random_graph;
    throw ConfigError("unknown arm '" + name + "' (expected ours, noproj or random)");
}

namespace {

struct Prepared
{
    RecordSplit split;
    std::vector<Batch> eval_batches;
    std::map<std::pair<Arm, std::uint64_t>, EmbeddingTable> tables;
};

Prepared prepare(const ExperimentData& data, const SkillGraph& graph, const ExperimentConfig& config)
{
    config.model.validate();
    config.train.validate();
    if (graph.node_count() != data.n_skills) {
        throw ConfigError("skill graph has " + std::to_string(graph.node_count()) + " nodes but data has "
                          + std::to_string(data.n_skills) + " skills");
    }
    if (config.seeds.empty()) throw ConfigError("experiment needs at least one seed");

    Prepared prep;
    SplitSpec split = config.split;
    split.subsample_fraction = 1.0;
    prep.split = split_records(data.records, split);
    const auto eval_seqs = build_sequences(prep.split.eval, config.model.max_len);
    prep.eval_batches = make_batches(eval_seqs, data.n_skills, config.model.max_len, config.train.batch_size);
    if (prep.eval_batches.empty()) throw ConfigError("evaluation split has no sequence of length >= 2");

    for (auto seed : config.seeds) {
        WalkConfig walk = config.walk;
        walk.seed = seed;
        walk.dim = config.model.skill_dim;
        for (auto arm : config.arms) {
            if (arm == Arm::ours) {
                prep.tables[{arm, seed}] = skill2vec(graph, walk).table;
            } else if (arm == Arm::random_graph) {
                const auto random = random_skill_graph(data.n_skills, graph.edge_count(), detail::mix_seed(seed));
                prep.tables[{arm, seed}] = skill2vec(random, walk).table;
            }
        }
    }
    return prep;
}

CellResult run_cell(const Prepared& prep, const std::vector<InteractionRecord>& train_records, NodeId n_skills,
                    double fraction, Arm arm, std::uint64_t seed, const ExperimentConfig& config)
{
    const auto train_seqs = build_sequences(train_records, config.model.max_len);
    const auto train_batches = make_batches(train_seqs, n_skills, config.model.max_len, config.train.batch_size);

    ModelConfig model_config = config.model;
    if (arm == Arm::no_projection) model_config.lambda = 0.0;
    KTModel<float> model(model_config, n_skills, seed);
    TrainConfig train_config = config.train;
    train_config.seed = seed;

    const EmbeddingTable* table = nullptr;
    if (arm != Arm::no_projection) table = &prep.tables.at({arm, seed});

    CellResult cell;
    cell.fraction = fraction;
    cell.arm = arm;
    cell.seed = seed;
    cell.detail = train(model, train_batches, prep.eval_batches, table, train_config);
    cell.detail.config_echo = config.config_echo;
    cell.auc = cell.detail.best_auc;
    cell.epochs_run = cell.detail.epochs_run;
    return cell;
}

} // namespace

std::vector<CellResult> run_ablation_suite(const ExperimentData& data, const SkillGraph& graph,
                                           const ExperimentConfig& config, const CellCallback& on_cell)
{
    const auto prep = prepare(data, graph, config);
    std::vector<CellResult> cells;
    for (auto arm : config.arms) {
        for (auto seed : config.seeds) {
            cells.push_back(run_cell(prep, prep.split.train, data.n_skills, 1.0, arm, seed, config));
            if (on_cell) on_cell(cells.back());
        }
    }
    return cells;
}

std::vector<CellResult> run_limited_data_study(const ExperimentData& data, const SkillGraph& graph,
                                               const ExperimentConfig& config, const CellCallback& on_cell)
{
    const auto prep = prepare(data, graph, config);
    std::vector<CellResult> cells;
    for (double fraction : config.fractions) {
        const auto train_records = subsample_records(prep.split.train, fraction, config.split.seed);
        for (auto arm : config.arms) {
            for (auto seed : config.seeds) {
                cells.push_back(run_cell(prep, train_records, data.n_skills, fraction, arm, seed, config));
                if (on_cell) on_cell(cells.back());
            }
        }
    }
    return cells;
}

std::vector<ArmSummary> summarize(std::span<const CellResult> cells)
{
    std::vector<ArmSummary> out;
    std::vector<std::vector<double>> values;
    for (const auto& c : cells) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const ArmSummary& s) { return s.fraction == c.fraction && s.arm == c.arm; });
        if (it == out.end()) {
            out.push_back(ArmSummary{c.fraction, c.arm, 0.0, 0.0, 0});
            values.emplace_back();
            it = out.end() - 1;
        }
        values[static_cast<std::size_t>(it - out.begin())].push_back(c.auc);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = values[i];
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        out[i].mean_auc = mean;
        out[i].std_auc = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        out[i].seeds = v.size();
    }
    std::stable_sort(out.begin(), out.end(), [](const ArmSummary& a, const ArmSummary& b) { return a.fraction < b.fraction; });
    return out;
}

void write_grid(std::span<const CellResult> cells, std::ostream& out)
{
    out << "fraction\tarm\tseed\tauc\tepochs_run\n";
    char buf[64];
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof buf, "%.17g", c.auc);
        out << c.fraction << '\t' << arm_name(c.arm) << '\t' << c.seed << '\t' << buf << '\t' << c.epochs_run << '\n';
    }
}

nlohmann::json summary_document(std::span<const CellResult> cells, const std::string& config_echo)
{
    nlohmann::json doc;
    doc["config"] = config_echo;
    doc["cells"] = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json epochs = nlohmann::json::array();
        for (const auto& e : c.detail.epochs) {
            nlohmann::json row = {{"epoch", e.epoch}, {"train_kt_loss", e.train_kt_loss}};
            if (e.train_projection_loss) row["train_projection_loss"] = *e.train_projection_loss;
            if (e.eval_auc) row["eval_auc"] = *e.eval_auc;
            epochs.push_back(row);
        }
        doc["cells"].push_back({{"fraction", c.fraction},
                                {"arm", arm_name(c.arm)},
                                {"seed", c.seed},
                                {"auc", c.auc},
                                {"best_epoch", c.detail.best_epoch},
                                {"epochs_run", c.epochs_run},
                                {"epochs", epochs}});
    }
    doc["summary"] = nlohmann::json::array();
    for (const auto& s : summarize(cells)) {
        doc["summary"].push_back({{"fraction", s.fraction},
                                  {"arm", arm_name(s.arm)},
                                  {"mean_auc", s.mean_auc},
                                  {"std_auc", s.std_auc},
                                  {"seeds", s.seeds}});
    }
    return doc;
}

std::string format_arm_table(std::span<const CellResult> cells)
{
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<double, Arm>> rows;
    for (const auto& c : cells) {
        if (std::find(seeds.begin(), seeds.end(), c.seed) == seeds.end()) seeds.push_back(c.seed);
        const std::pair<double, Arm> key{c.fraction, c.arm};
        if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    }
    const auto summary = summarize(cells);
    std::ostringstream os;
    char buf[64];
    os << "fraction  arm     ";
    for (auto s : seeds) {
        std::snprintf(buf, sizeof buf, "  seed%-4llu", static_cast<unsigned long long>(s));
        os << buf;
    }
    os << "      mean       std\n";
    for (const auto& [fraction, arm] : rows) {
        std::snprintf(buf, sizeof buf, "%-8.3g  %-6s  ", fraction, arm_name(arm).c_str());
        os << buf;
        for (auto s : seeds) {
            auto it = std::find_if(cells.begin(), cells.end(), [&](const CellResult& c) {
                return c.fraction == fraction && c.arm == arm && c.seed == s;
            });
            if (it == cells.end()) {
                os << "         -";
            } else {
                std::snprintf(buf, sizeof buf, "  %8.4f", it->auc);
                os << buf;
            }
        }
        for (const auto& sm : summary) {
            if (sm.fraction == fraction && sm.arm == arm) {
                std::snprintf(buf, sizeof buf, "  %8.4f  %8.4f", sm.mean_auc, sm.std_auc);
                os << buf;
            }
        }
        os << '\n';
    }
    return os.str();
}

} // namespace skillkt
