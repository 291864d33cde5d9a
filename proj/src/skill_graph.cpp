#include "skillkt/skill_graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "skillkt/errors.hpp"

namespace skillkt {

SkillGraph::SkillGraph(NodeId node_count)
{
    if (node_count < 0) throw ConfigError("skill graph: negative node count");
    adjacency_.resize(static_cast<std::size_t>(node_count));
}

bool SkillGraph::add_edge(NodeId u, NodeId v)
{
    if (u < 0 || v < 0 || u >= node_count() || v >= node_count()) {
        throw RangeError("skill graph: edge (" + std::to_string(u) + ", " + std::to_string(v)
                         + ") outside [0, " + std::to_string(node_count()) + ")");
    }
    if (u == v) throw RangeError("skill graph: self-loop on node " + std::to_string(u));
    auto& au = adjacency_[u];
    auto pos = std::lower_bound(au.begin(), au.end(), v);
    if (pos != au.end() && *pos == v) return false;
    au.insert(pos, v);
    auto& av = adjacency_[v];
    av.insert(std::lower_bound(av.begin(), av.end(), u), u);
    ++edge_count_;
    return true;
}

bool SkillGraph::has_edge(NodeId u, NodeId v) const
{
    if (u < 0 || u >= node_count()) return false;
    const auto& au = adjacency_[u];
    return std::binary_search(au.begin(), au.end(), v);
}

std::vector<std::size_t> SkillGraph::degrees() const
{
    std::vector<std::size_t> out;
    out.reserve(adjacency_.size());
    for (const auto& a : adjacency_) out.push_back(a.size());
    return out;
}

std::vector<NodeId> SkillGraph::isolated_nodes() const
{
    std::vector<NodeId> out;
    for (NodeId v = 0; v < node_count(); ++v) {
        if (adjacency_[v].empty()) out.push_back(v);
    }
    return out;
}

std::vector<NodeId> SkillGraph::walkable_nodes() const
{
    std::vector<NodeId> out;
    for (NodeId v = 0; v < node_count(); ++v) {
        if (!adjacency_[v].empty()) out.push_back(v);
    }
    return out;
}

std::vector<std::pair<NodeId, NodeId>> SkillGraph::edges() const
{
    std::vector<std::pair<NodeId, NodeId>> out;
    out.reserve(edge_count_);
    for (NodeId u = 0; u < node_count(); ++u) {
        for (auto v : adjacency_[u]) {
            if (u < v) out.emplace_back(u, v);
        }
    }
    return out;
}

namespace {

NodeId parse_node(std::string_view token, std::size_t line)
{
    long long value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw ParseError("expected integer node id, got '" + std::string(token) + "'", line);
    }
    if (value < 0 || value > std::numeric_limits<NodeId>::max()) {
        throw RangeError("line " + std::to_string(line) + ": node id " + std::string(token) + " out of range");
    }
    return static_cast<NodeId>(value);
}

} // namespace

SkillGraph load_edge_list(std::istream& in, NodeId node_count)
{
    SkillGraph graph(node_count);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        std::istringstream fields{std::string(line)};
        std::vector<std::string> tokens;
        for (std::string tok; fields >> tok;) tokens.push_back(tok);
        if (tokens.empty()) continue;
        if (tokens.size() != 2) {
            throw ParseError("expected 2 node ids, got " + std::to_string(tokens.size()) + " fields", line_no);
        }
        const NodeId u = parse_node(tokens[0], line_no);
        const NodeId v = parse_node(tokens[1], line_no);
        if (u >= node_count || v >= node_count) {
            throw RangeError("line " + std::to_string(line_no) + ": node id "
                             + std::to_string(std::max(u, v)) + " >= node count " + std::to_string(node_count));
        }
        if (u == v) throw ParseError("self-loop on node " + std::to_string(u), line_no);
        graph.add_edge(u, v);
    }
    return graph;
}

SkillGraph load_edge_list(const std::filesystem::path& path, NodeId node_count)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open edge list '" + path.string() + "'");
    return load_edge_list(in, node_count);
}

void write_edge_list(const SkillGraph& graph, std::ostream& out)
{
    for (auto [u, v] : graph.edges()) out << u << '\t' << v << '\n';
}

SkillGraph random_skill_graph(NodeId node_count, std::size_t edge_count, std::uint64_t seed)
{
    const auto n = static_cast<std::uint64_t>(node_count);
    const std::uint64_t possible = n * (n > 0 ? n - 1 : 0) / 2;
    if (edge_count > possible) {
        throw ConfigError("random graph: " + std::to_string(edge_count) + " edges requested but only "
                          + std::to_string(possible) + " pairs exist among " + std::to_string(node_count)
                          + " nodes");
    }
    std::vector<std::pair<NodeId, NodeId>> pairs;
    pairs.reserve(possible);
    for (NodeId u = 0; u < node_count; ++u) {
        for (NodeId v = u + 1; v < node_count; ++v) pairs.emplace_back(u, v);
    }
    // partial Fisher-Yates: the first edge_count slots are a uniform sample
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < edge_count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pairs.size() - 1);
        std::swap(pairs[i], pairs[pick(rng)]);
    }
    SkillGraph graph(node_count);
    for (std::size_t i = 0; i < edge_count; ++i) graph.add_edge(pairs[i].first, pairs[i].second);
    return graph;
}

} // namespace skillkt
