#include <doctest.h>

#include <set>
#include <sstream>

#include "skillkt/errors.hpp"
#include "skillkt/skill_graph.hpp"

using namespace skillkt;

namespace {

SkillGraph parse(const std::string& text, NodeId n)
{
    std::istringstream in(text);
    return load_edge_list(in, n);
}

} // namespace

TEST_CASE("duplicate edges collapse in either direction")
{
    const auto g = parse("0 1\n1 0\n", 2);
    CHECK(g.edge_count() == 1);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 0));
}

TEST_CASE("empty source keeps every declared node")
{
    const auto g = parse("", 110);
    CHECK(g.node_count() == 110);
    CHECK(g.edge_count() == 0);
    CHECK(g.isolated_nodes().size() == 110);
    CHECK(g.walkable_nodes().empty());
}

TEST_CASE("degree sequence of a path")
{
    const auto g = parse("0 1\n1 2\n", 3);
    CHECK(g.degrees() == std::vector<std::size_t>{1, 2, 1});
}

TEST_CASE("comments, blank lines and tabs")
{
    const auto g = parse("# header\n\n0\t3   # trailing\n  2 1\n", 4);
    CHECK(g.edge_count() == 2);
    CHECK(g.has_edge(3, 0));
    CHECK(g.has_edge(1, 2));
    CHECK(g.isolated_nodes().empty());
}

TEST_CASE("adjacency is symmetric and sorted")
{
    const auto g = parse("3 0\n0 2\n1 0\n2 3\n", 5);
    for (NodeId u = 0; u < g.node_count(); ++u) {
        const auto nb = g.neighbors(u);
        CHECK(std::is_sorted(nb.begin(), nb.end()));
        for (auto v : nb) CHECK(g.has_edge(v, u));
    }
    CHECK(g.isolated_nodes() == std::vector<NodeId>{4});
    CHECK(g.edges() == std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {0, 2}, {0, 3}, {2, 3}});
}

TEST_CASE("parse errors carry the line number")
{
    try {
        parse("0 1\n1 x\n", 3);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse("0 1 2\n", 3), ParseError);
    CHECK_THROWS_AS(parse("0\n", 3), ParseError);
    CHECK_THROWS_AS(parse("0 1.5\n", 3), ParseError);
    CHECK_THROWS_AS(parse("1 1\n", 3), Error);
}

TEST_CASE("out-of-range ids")
{
    CHECK_THROWS_AS(parse("0 3\n", 3), RangeError);
    CHECK_THROWS_AS(parse("-1 2\n", 3), Error);
    try {
        parse("0 1\n\n2 7\n", 3);
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("add_edge rejects self-loops and bad ids")
{
    SkillGraph g(3);
    CHECK(g.add_edge(0, 1));
    CHECK_FALSE(g.add_edge(1, 0));
    CHECK_THROWS_AS(g.add_edge(2, 2), Error);
    CHECK_THROWS_AS(g.add_edge(0, 3), RangeError);
}

TEST_CASE("write then load round-trips")
{
    const auto g = random_skill_graph(20, 40, 9);
    std::stringstream buf;
    write_edge_list(g, buf);
    CHECK(load_edge_list(buf, 20) == g);
}

TEST_CASE("random graphs")
{
    CHECK(random_skill_graph(10, 0, 1).edge_count() == 0);

    const auto k4 = random_skill_graph(4, 6, 3);
    for (NodeId u = 0; u < 4; ++u) {
        for (NodeId v = 0; v < 4; ++v) {
            if (u != v) CHECK(k4.has_edge(u, v));
        }
    }

    const auto g = random_skill_graph(110, 300, 5);
    CHECK(g.edge_count() == 300);
    std::size_t degree_sum = 0;
    for (auto d : g.degrees()) degree_sum += d;
    CHECK(degree_sum == 600);

    CHECK(random_skill_graph(110, 300, 5) == g);
    std::set<std::vector<std::pair<NodeId, NodeId>>> distinct;
    for (std::uint64_t seed = 0; seed < 10; ++seed) distinct.insert(random_skill_graph(30, 40, seed).edges());
    CHECK(distinct.size() == 10);

    CHECK_THROWS_AS(random_skill_graph(4, 7, 1), ConfigError);
}

TEST_CASE("random graph edges are roughly uniform over pairs")
{
    // each of the 15 pairs of a 6-node graph lands in a 5-edge sample with probability 1/3
    std::vector<int> hits(36, 0);
    const int trials = 3000;
    for (int s = 0; s < trials; ++s) {
        for (auto [u, v] : random_skill_graph(6, 5, static_cast<std::uint64_t>(s)).edges()) ++hits[u * 6 + v];
    }
    for (NodeId u = 0; u < 6; ++u) {
        for (NodeId v = u + 1; v < 6; ++v) CHECK(hits[u * 6 + v] / double(trials) == doctest::Approx(1.0 / 3).epsilon(0.1));
    }
}
