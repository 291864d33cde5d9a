#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "skillkt/dataset.hpp"
#include "skillkt/node2vec.hpp"
#include "skillkt/trainer.hpp"

namespace skillkt {

/// Ablation arms: the full method, no projection loss (λ = 0), and a random graph with matched edge count.
enum class Arm
{
    ours,
    no_projection,
    random_graph
};

std::string arm_name(Arm arm);
Arm parse_arm(const std::string& name);

struct ExperimentConfig
{
    ModelConfig model;
    TrainConfig train;
    WalkConfig walk;
    SplitSpec split;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<double> fractions{0.05, 0.1, 0.5, 1.0};
    std::vector<Arm> arms{Arm::ours, Arm::no_projection, Arm::random_graph};
    std::string config_echo;
};

struct ExperimentData
{
    std::vector<InteractionRecord> records;
    NodeId n_skills = 0;
};

struct CellResult
{
    double fraction = 1.0;
    Arm arm = Arm::ours;
    std::uint64_t seed = 0;
    double auc = 0.0;  ///< best eval AUC
    int epochs_run = 0;
    ExperimentResult detail;
};

using CellCallback = std::function<void(const CellResult&)>;

/**
 * Every arm in config.arms × every seed on the full training split. Seeds
 * drive model init, batch order, dropout and Skill2Vec; the data split is
 * fixed by config.split.seed, so arms are paired.
 */
std::vector<CellResult> run_ablation_suite(const ExperimentData& data, const SkillGraph& graph,
                                           const ExperimentConfig& config, const CellCallback& on_cell = {});

/// Every fraction × arm × seed, subsampling the training split (nested across fractions).
std::vector<CellResult> run_limited_data_study(const ExperimentData& data, const SkillGraph& graph,
                                               const ExperimentConfig& config, const CellCallback& on_cell = {});

struct ArmSummary
{
    double fraction = 1.0;
    Arm arm = Arm::ours;
    double mean_auc = 0.0;
    double std_auc = 0.0;  ///< sample standard deviation; 0 for a single seed
    std::size_t seeds = 0;
};

/// Per (fraction, arm) mean and spread, ordered by fraction then arm order of first appearance.
std::vector<ArmSummary> summarize(std::span<const CellResult> cells);

/// Rows: fraction, arm, seed, auc, epochs_run (tab-separated, with header).
void write_grid(std::span<const CellResult> cells, std::ostream& out);

nlohmann::json summary_document(std::span<const CellResult> cells, const std::string& config_echo);

/// One row per arm, one column per seed, plus mean and std.
std::string format_arm_table(std::span<const CellResult> cells);

} // namespace skillkt
