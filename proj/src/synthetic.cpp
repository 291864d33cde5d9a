#include "skillkt/synthetic.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "skillkt/errors.hpp"

namespace skillkt {

void SynthConfig::validate() const
{
    if (n_students < 1) throw ConfigError("synthetic: need at least one student");
    if (n_skills < 1) throw ConfigError("synthetic: need at least one skill");
    if (interactions_per_student < 1) throw ConfigError("synthetic: interactions per student must be >= 1");
    if (cluster_sizes.empty()) {
        if (n_clusters < 1 || n_clusters > n_skills) {
            throw ConfigError("synthetic: cluster count must be in [1, n_skills]");
        }
    } else {
        long total = 0;
        for (auto c : cluster_sizes) {
            if (c < 1) throw ConfigError("synthetic: empty cluster in cluster spec");
            total += c;
        }
        if (total != n_skills) throw ConfigError("synthetic: cluster sizes must sum to n_skills");
    }
    if (!difficulties.empty() && static_cast<NodeId>(difficulties.size()) != n_skills) {
        throw ConfigError("synthetic: difficulty override must have one value per skill");
    }
    if (ability_sd < 0 || difficulty_sd < 0) throw ConfigError("synthetic: standard deviations must be >= 0");
    if (!(cluster_stickiness >= 0.0 && cluster_stickiness <= 1.0)) {
        throw ConfigError("synthetic: cluster stickiness must be in [0, 1]");
    }
}

SyntheticData synthesize_students(const SynthConfig& config)
{
    config.validate();
    std::vector<int> sizes = config.cluster_sizes;
    if (sizes.empty()) {
        for (int c = 0; c < config.n_clusters; ++c) {
            sizes.push_back(config.n_skills / config.n_clusters + (c < config.n_skills % config.n_clusters ? 1 : 0));
        }
    }
    const int n_clusters = static_cast<int>(sizes.size());

    SyntheticData data;
    data.truth = SkillGraph(config.n_skills);
    std::vector<std::vector<NodeId>> members(static_cast<std::size_t>(n_clusters));
    NodeId next = 0;
    for (int c = 0; c < n_clusters; ++c) {
        for (int k = 0; k < sizes[c]; ++k) {
            data.cluster_of.push_back(c);
            members[c].push_back(next++);
        }
        for (std::size_t a = 0; a < members[c].size(); ++a) {
            for (std::size_t b = a + 1; b < members[c].size(); ++b) data.truth.add_edge(members[c][a], members[c][b]);
        }
    }

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    data.difficulty = config.difficulties;
    if (data.difficulty.empty()) {
        for (NodeId s = 0; s < config.n_skills; ++s) data.difficulty.push_back(config.difficulty_sd * normal(rng));
    }

    std::int64_t order = 0;
    data.records.reserve(static_cast<std::size_t>(config.n_students) * config.interactions_per_student);
    for (int student = 0; student < config.n_students; ++student) {
        std::vector<double> ability(static_cast<std::size_t>(n_clusters));
        for (auto& a : ability) a = config.ability_sd * normal(rng);
        int cluster = std::uniform_int_distribution<int>(0, n_clusters - 1)(rng);
        for (int t = 0; t < config.interactions_per_student; ++t) {
            NodeId skill;
            if (t > 0 && unit(rng) < config.cluster_stickiness) {
                const auto& m = members[cluster];
                skill = m[std::uniform_int_distribution<std::size_t>(0, m.size() - 1)(rng)];
            } else {
                skill = std::uniform_int_distribution<NodeId>(0, config.n_skills - 1)(rng);
            }
            cluster = data.cluster_of[skill];
            const double logit = ability[cluster] - data.difficulty[skill];
            const double p = 1.0 / (1.0 + std::exp(-logit));
            const std::uint8_t correct = unit(rng) < p ? 1 : 0;
            data.records.push_back(InteractionRecord{student, order++, skill, correct});
            ability[cluster] += config.learning_rate;
        }
    }
    return data;
}

} // namespace skillkt
