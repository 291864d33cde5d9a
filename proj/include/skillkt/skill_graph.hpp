#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace skillkt {

using NodeId = std::int32_t;

/// Undirected simple graph over skills 0..node_count-1.
class SkillGraph
{
public:
    explicit SkillGraph(NodeId node_count = 0);

    /// Adds {u, v}. Returns false when the edge already existed.
    bool add_edge(NodeId u, NodeId v);

    NodeId node_count() const noexcept { return static_cast<NodeId>(adjacency_.size()); }
    std::size_t edge_count() const noexcept { return edge_count_; }

    /// Sorted neighbour list.
    std::span<const NodeId> neighbors(NodeId v) const { return adjacency_.at(v); }
    std::size_t degree(NodeId v) const { return adjacency_.at(v).size(); }
    bool has_edge(NodeId u, NodeId v) const;

    std::vector<std::size_t> degrees() const;
    std::vector<NodeId> isolated_nodes() const;
    std::vector<NodeId> walkable_nodes() const;

    /// Edges as (u, v) with u < v, in lexicographic order.
    std::vector<std::pair<NodeId, NodeId>> edges() const;

    bool operator==(const SkillGraph&) const = default;

private:
    std::vector<std::vector<NodeId>> adjacency_;
    std::size_t edge_count_ = 0;
};

/**
 * Reads whitespace-separated integer pairs, one edge per line. `#` starts a
 * comment. Duplicate edges (in either direction) collapse; every id must be in
 * [0, node_count). Throws ParseError / RangeError carrying the line number.
 */
SkillGraph load_edge_list(std::istream& in, NodeId node_count);
SkillGraph load_edge_list(const std::filesystem::path& path, NodeId node_count);

void write_edge_list(const SkillGraph& graph, std::ostream& out);

/// Uniformly sampled simple graph with exactly `edge_count` edges.
SkillGraph random_skill_graph(NodeId node_count, std::size_t edge_count, std::uint64_t seed);

} // namespace skillkt
