#pragma once

#include <cstdint>
#include <vector>

#include "skillkt/dataset.hpp"
#include "skillkt/skill_graph.hpp"

namespace skillkt {

/**
 * Simulated learners. Skills are partitioned into clusters; each student has
 * one latent ability per cluster and each skill a difficulty, with
 * P(correct) = σ(ability[cluster(s)] − difficulty[s]). Every practiced
 * interaction raises the ability of its cluster by learning_rate.
 */
struct SynthConfig
{
    int n_students = 50;
    NodeId n_skills = 16;
    int n_clusters = 2;
    std::vector<int> cluster_sizes;  ///< overrides the even split when non-empty
    int interactions_per_student = 100;
    double learning_rate = 0.02;
    double ability_sd = 1.0;
    double difficulty_sd = 1.0;
    std::vector<double> difficulties;  ///< overrides sampled difficulties when non-empty
    /// Probability the next practiced skill stays in the current cluster.
    double cluster_stickiness = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticData
{
    std::vector<InteractionRecord> records;
    SkillGraph truth;  ///< all intra-cluster pairs
    std::vector<int> cluster_of;
    std::vector<double> difficulty;
};

SyntheticData synthesize_students(const SynthConfig& config);

} // namespace skillkt
