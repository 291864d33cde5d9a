#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "skillkt/embedding_table.hpp"
#include "skillkt/skill_graph.hpp"

namespace skillkt {

struct WalkConfig
{
    int walk_length = 128;
    std::int64_t num_walks = 300000;
    double p = 1.0;  ///< return parameter
    double q = 1.0;  ///< in-out parameter
    int window = 4;
    int dim = 25;
    int negatives = 5;
    int epochs = 5;
    double learning_rate = 0.025;  ///< initial skip-gram rate, decayed linearly
    std::uint64_t seed = 1;
    int shards = 1;  ///< walk shards; shard s draws from seed + s

    void validate() const;
};

using Walk = std::vector<NodeId>;
using WalkCorpus = std::vector<Walk>;

/**
 * Second-order transition distribution out of `cur`, aligned with
 * graph.neighbors(cur). Unnormalised weights are 1/p back to `prev`, 1 to
 * neighbours of `prev`, and 1/q otherwise. Pass prev = -1 for the first step
 * (uniform). Returns an empty vector when `cur` is isolated.
 */
std::vector<double> transition_probabilities(const SkillGraph& graph, NodeId prev, NodeId cur, double p, double q);

/// Walk w starts at walkable_nodes()[w % count]. Deterministic given config.seed and config.shards.
WalkCorpus generate_walks(const SkillGraph& graph, const WalkConfig& config);

/// Skip-gram with negative sampling over node ids in [0, node_count).
class SkipGram
{
public:
    SkipGram(NodeId node_count, int dim, std::uint64_t seed);

    /// One SGD step on log σ(u_c·v_ctx) + Σ log σ(−u_c·v_neg). Returns the pre-update loss.
    double train_pair(NodeId center, NodeId context, std::span<const NodeId> negatives, double learning_rate);

    /// σ(u_center · v_context)
    double score(NodeId center, NodeId context) const;

    /// Input-side (centre) vectors.
    EmbeddingTable input_vectors() const;

private:
    int dim_;
    std::vector<float> input_;
    std::vector<float> output_;
    std::vector<float> scratch_;
};

struct SkipGramReport
{
    std::vector<double> epoch_loss;  ///< mean loss per positive pair
};

EmbeddingTable train_skipgram(const WalkCorpus& corpus, NodeId node_count, const WalkConfig& config,
                              SkipGramReport* report = nullptr);

struct Skill2VecResult
{
    EmbeddingTable table;
    std::vector<NodeId> isolated;  ///< rows forced to zero
    std::vector<double> epoch_loss;
};

/// Walks + skip-gram over the whole graph; isolated skills get a zero vector.
Skill2VecResult skill2vec(const SkillGraph& graph, const WalkConfig& config);

} // namespace skillkt
