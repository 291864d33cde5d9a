#include "skillkt/node2vec.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "skillkt/errors.hpp"

namespace skillkt {

void WalkConfig::validate() const
{
    if (walk_length < 2) throw ConfigError("walk_length must be >= 2");
    if (num_walks < 1) throw ConfigError("num_walks must be >= 1");
    if (!(p > 0.0) || !(q > 0.0)) throw ConfigError("p and q must be > 0");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (negatives < 0) throw ConfigError("negatives must be >= 0");
    if (epochs < 1) throw ConfigError("skip-gram epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("skip-gram learning rate must be > 0");
    if (shards < 1) throw ConfigError("shards must be >= 1");
}

std::vector<double> transition_probabilities(const SkillGraph& graph, NodeId prev, NodeId cur, double p, double q)
{
    const auto nbrs = graph.neighbors(cur);
    std::vector<double> probs(nbrs.size());
    if (nbrs.empty()) return probs;
    double total = 0.0;
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
        double w = 1.0;
        if (prev >= 0) {
            if (nbrs[i] == prev) w = 1.0 / p;
            else if (!graph.has_edge(nbrs[i], prev)) w = 1.0 / q;
        }
        probs[i] = w;
        total += w;
    }
    for (auto& x : probs) x /= total;
    return probs;
}

namespace {

std::size_t sample_index(std::mt19937_64& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::size_t sample_weighted(std::mt19937_64& rng, const std::vector<double>& probs)
{
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

} // namespace

WalkCorpus generate_walks(const SkillGraph& graph, const WalkConfig& config)
{
    config.validate();
    const auto starts = graph.walkable_nodes();
    if (starts.empty()) throw ConfigError("no walkable nodes: graph has no edges");
    const bool uniform = config.p == 1.0 && config.q == 1.0;

    WalkCorpus corpus(static_cast<std::size_t>(config.num_walks));
    const std::int64_t per_shard = (config.num_walks + config.shards - 1) / config.shards;
    for (int shard = 0; shard < config.shards; ++shard) {
        std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(shard));
        const std::int64_t begin = shard * per_shard;
        const std::int64_t end = std::min<std::int64_t>(config.num_walks, begin + per_shard);
        for (std::int64_t w = begin; w < end; ++w) {
            Walk& walk = corpus[w];
            walk.reserve(config.walk_length);
            walk.push_back(starts[w % starts.size()]);
            NodeId prev = -1;
            while (static_cast<int>(walk.size()) < config.walk_length) {
                const NodeId cur = walk.back();
                const auto nbrs = graph.neighbors(cur);
                if (nbrs.empty()) break;
                std::size_t pick = 0;
                if (uniform || prev < 0) {
                    pick = sample_index(rng, nbrs.size());
                } else {
                    pick = sample_weighted(rng, transition_probabilities(graph, prev, cur, config.p, config.q));
                }
                prev = cur;
                walk.push_back(nbrs[pick]);
            }
        }
    }
    return corpus;
}

namespace {

float fast_sigmoid(float x)
{
    if (x > 30.0f) return 1.0f;
    if (x < -30.0f) return 0.0f;
    return 1.0f / (1.0f + std::exp(-x));
}

} // namespace

SkipGram::SkipGram(NodeId node_count, int dim, std::uint64_t seed)
    : dim_(dim)
    , input_(static_cast<std::size_t>(node_count) * dim)
    , output_(static_cast<std::size_t>(node_count) * dim, 0.0f)
    , scratch_(static_cast<std::size_t>(dim))
{
    if (dim < 1) throw ConfigError("skip-gram dim must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> init(-0.5f / dim, 0.5f / dim);
    for (auto& x : input_) x = init(rng);
}

double SkipGram::train_pair(NodeId center, NodeId context, std::span<const NodeId> negatives, double learning_rate)
{
    float* u = &input_[static_cast<std::size_t>(center) * dim_];
    std::fill(scratch_.begin(), scratch_.end(), 0.0f);
    double loss = 0.0;
    const float lr = static_cast<float>(learning_rate);

    auto step = [&](NodeId target, float label) {
        float* v = &output_[static_cast<std::size_t>(target) * dim_];
        float dot = 0.0f;
        for (int k = 0; k < dim_; ++k) dot += u[k] * v[k];
        const float s = fast_sigmoid(dot);
        const float clipped = std::clamp(label > 0 ? s : 1.0f - s, 1e-7f, 1.0f);
        loss -= std::log(clipped);
        const float g = lr * (label - s);
        for (int k = 0; k < dim_; ++k) {
            scratch_[k] += g * v[k];
            v[k] += g * u[k];
        }
    };

    step(context, 1.0f);
    for (auto neg : negatives) {
        if (neg == context) continue;
        step(neg, 0.0f);
    }
    for (int k = 0; k < dim_; ++k) u[k] += scratch_[k];
    return loss;
}

double SkipGram::score(NodeId center, NodeId context) const
{
    const float* u = &input_[static_cast<std::size_t>(center) * dim_];
    const float* v = &output_[static_cast<std::size_t>(context) * dim_];
    double dot = 0.0;
    for (int k = 0; k < dim_; ++k) dot += double(u[k]) * double(v[k]);
    return 1.0 / (1.0 + std::exp(-dot));
}

EmbeddingTable SkipGram::input_vectors() const
{
    const Index rows = static_cast<Index>(input_.size() / dim_);
    EmbeddingTable table{Matrix<double>(rows, dim_)};
    for (Index r = 0; r < rows; ++r) {
        for (int c = 0; c < dim_; ++c) table.vectors(r, c) = input_[static_cast<std::size_t>(r) * dim_ + c];
    }
    return table;
}

EmbeddingTable train_skipgram(const WalkCorpus& corpus, NodeId node_count, const WalkConfig& config,
                              SkipGramReport* report)
{
    config.validate();
    std::int64_t tokens = 0;
    std::vector<double> counts(static_cast<std::size_t>(node_count), 0.0);
    for (const auto& walk : corpus) {
        tokens += static_cast<std::int64_t>(walk.size());
        for (auto v : walk) {
            if (v < 0 || v >= node_count) throw RangeError("walk visits node " + std::to_string(v) + " outside graph");
            counts[v] += 1.0;
        }
    }
    if (tokens == 0) throw ConfigError("skip-gram: empty corpus");

    // unigram^(3/4) lookup table for negative draws
    constexpr std::size_t kTableSize = 1 << 20;
    std::vector<NodeId> unigram;
    unigram.reserve(kTableSize);
    {
        std::vector<NodeId> present;
        double norm = 0.0;
        for (NodeId v = 0; v < node_count; ++v) {
            if (counts[v] > 0.0) {
                present.push_back(v);
                norm += std::pow(counts[v], 0.75);
            }
        }
        std::size_t k = 0;
        double cumulative = std::pow(counts[present[0]], 0.75) / norm;
        for (std::size_t i = 0; i < kTableSize; ++i) {
            unigram.push_back(present[k]);
            if (static_cast<double>(i + 1) / kTableSize > cumulative && k + 1 < present.size()) {
                ++k;
                cumulative += std::pow(counts[present[k]], 0.75) / norm;
            }
        }
    }

    SkipGram model(node_count, config.dim, config.seed);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<NodeId> negatives(static_cast<std::size_t>(config.negatives));
    const double total_work = static_cast<double>(tokens) * config.epochs;
    double processed = 0.0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss = 0.0;
        std::int64_t pairs = 0;
        for (const auto& walk : corpus) {
            const auto len = static_cast<std::ptrdiff_t>(walk.size());
            for (std::ptrdiff_t i = 0; i < len; ++i) {
                const double lr = config.learning_rate * std::max(1e-4, 1.0 - processed / total_work);
                processed += 1.0;
                const auto lo = std::max<std::ptrdiff_t>(0, i - config.window);
                const auto hi = std::min<std::ptrdiff_t>(len - 1, i + config.window);
                for (auto j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    for (auto& n : negatives) n = unigram[rng() & (kTableSize - 1)];
                    loss += model.train_pair(walk[i], walk[j], negatives, lr);
                    ++pairs;
                }
            }
        }
        if (report) report->epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
    }
    return model.input_vectors();
}

Skill2VecResult skill2vec(const SkillGraph& graph, const WalkConfig& config)
{
    Skill2VecResult result;
    const auto corpus = generate_walks(graph, config);
    SkipGramReport report;
    result.table = train_skipgram(corpus, graph.node_count(), config, &report);
    result.epoch_loss = std::move(report.epoch_loss);
    result.isolated = graph.isolated_nodes();
    for (auto v : result.isolated) result.table.vectors.row(v).setZero();
    return result;
}

} // namespace skillkt
