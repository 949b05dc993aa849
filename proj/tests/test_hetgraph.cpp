#include <catch2/catch_amalgamated.hpp>

#include "dshgt/hetgraph.hpp"
#include "support/test_graphs.hpp"

using namespace dshgt;

TEST_CASE("registry seeds the full builtin schema") {
    TypeRegistry reg;
    CHECK(reg.node_type_count() == 45);
    CHECK(reg.edge_type_count() == 20);
    CHECK(reg.relation_count() == 40);
    CHECK(reg.node_type("METHOD").has_value());
    CHECK(reg.edge_type("REACHING_DEF").has_value());
}

TEST_CASE("registry extensions append without disturbing indices") {
    TypeRegistry reg;
    TypeId method = reg.node_type_checked("METHOD");
    TypeId lambda = reg.add_node_type("LAMBDA");
    CHECK(lambda == 45);
    CHECK(reg.add_node_type("LAMBDA") == lambda);  // idempotent
    CHECK(reg.node_type_checked("METHOD") == method);
    CHECK(reg.node_type_count() == 46);
}

TEST_CASE("add_node basics") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 1;
    n.node_type = reg.node_type_checked("METHOD");
    n.code = "int f()";
    REQUIRE(g.add_node(n) == 1);
    CHECK(g.nodes().size() == 1);
    CHECK(g.edges().empty());

    SECTION("re-adding the same id fails") {
        CHECK_THROWS_WITH(g.add_node(n), Catch::Matchers::ContainsSubstring("duplicate id"));
    }
    SECTION("unknown type index fails") {
        CpgNode bad;
        bad.id = 2;
        bad.node_type = reg.node_type_count() + 7;
        CHECK_THROWS_AS(g.add_node(bad), GraphError);
    }
}

TEST_CASE("sample slice node set has nine nodes") {
    Cpg g = testing::make_two_method_graph();
    std::set<NodeId> ids;
    for (NodeId id : {1, 3, 6, 7, 8, 11, 13, 14, 15}) {
        REQUIRE(g.has_node(id));
        ids.insert(id);
    }
    CHECK(ids.size() == 9);
}

TEST_CASE("add_edge updates both adjacency indexes") {
    Cpg g = testing::make_two_method_graph();
    bool found = false;
    for (std::size_t idx : g.out_edges(1))
        if (g.edges()[idx].dst == 3) found = true;
    CHECK(found);
    found = false;
    for (std::size_t idx : g.in_edges(3))
        if (g.edges()[idx].src == 1) found = true;
    CHECK(found);
}

TEST_CASE("edge to a missing node is rejected") {
    Cpg g = testing::make_two_method_graph();
    CpgEdge e;
    e.src = 1;
    e.dst = 99;
    e.edge_type = g.registry().edge_type_checked("AST");
    CHECK_THROWS_WITH(g.add_edge(e), Catch::Matchers::ContainsSubstring("dangling endpoint"));
}

TEST_CASE("parallel edges of distinct types are both stored") {
    TypeRegistry reg;
    Cpg g(reg);
    for (NodeId id : {1, 2}) {
        CpgNode n;
        n.id = id;
        n.node_type = reg.node_type_checked("CALL");
        g.add_node(n);
    }
    std::vector<CpgEdge> inserted = {
        {1, 2, reg.edge_type_checked("CFG"), ""},
        {1, 2, reg.edge_type_checked("CDG"), ""},
    };
    for (const CpgEdge& e : inserted) g.add_edge(e);
    REQUIRE(g.edges().size() == inserted.size());
    for (std::size_t i = 0; i < inserted.size(); ++i) {
        CHECK(g.edges()[i].src == inserted[i].src);
        CHECK(g.edges()[i].dst == inserted[i].dst);
        CHECK(g.edges()[i].edge_type == inserted[i].edge_type);
    }

    SECTION("identical (type,label) duplicates are rejected") {
        CHECK_THROWS_AS(g.add_edge({1, 2, reg.edge_type_checked("CFG"), ""}), GraphError);
    }
    SECTION("same type with a different label is a distinct edge") {
        g.add_edge({1, 2, reg.edge_type_checked("CFG"), "true"});
        CHECK(g.edges().size() == 3);
    }
}

TEST_CASE("incident sources of the sample call node") {
    Cpg g = testing::make_two_method_graph();
    auto sources = g.incident_sources(11);
    REQUIRE(sources.size() == 4);
    std::set<NodeId> ids;
    for (const auto& s : sources) ids.insert(s.source);
    CHECK(ids == std::set<NodeId>{8, 13, 14, 15});

    // 8 -> 11 arrives at the target: base relation. 11 -> 13 leaves it:
    // reversed relation id offset by the edge type count.
    TypeId ast = g.registry().edge_type_checked("AST");
    for (const auto& s : sources) {
        if (s.source == 8) {
            CHECK_FALSE(s.reversed);
            CHECK(s.relation == ast);
        } else {
            CHECK(s.reversed);
            CHECK(s.relation == g.registry().edge_type_count() + ast);
        }
    }
}

TEST_CASE("incident sources of an isolated node are empty") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 5;
    n.node_type = reg.node_type_checked("LITERAL");
    g.add_node(n);
    CHECK(g.incident_sources(5).empty());
    CHECK_THROWS_AS(g.incident_sources(6), GraphError);
}

TEST_CASE("incident sources match the brute-force edge scan") {
    for (std::uint64_t seed : {11u, 22u, 33u, 44u, 55u}) {
        Cpg g = testing::make_random_graph(10, 25, seed);
        for (const CpgNode& n : g.nodes()) {
            std::set<NodeId> got;
            for (const auto& s : g.incident_sources(n.id)) got.insert(s.source);
            CHECK(got == testing::brute_force_neighbors(g, n.id));
        }
    }
}

TEST_CASE("incident sources are ordered by edge insertion") {
    TypeRegistry reg;
    Cpg g(reg);
    for (NodeId id : {1, 2, 3, 4}) {
        CpgNode n;
        n.id = id;
        n.node_type = reg.node_type_checked("CALL");
        g.add_node(n);
    }
    TypeId cfg = reg.edge_type_checked("CFG");
    g.add_edge({2, 1, cfg, ""});
    g.add_edge({1, 3, cfg, ""});
    g.add_edge({4, 1, cfg, ""});
    auto sources = g.incident_sources(1);
    REQUIRE(sources.size() == 3);
    CHECK(sources[0].source == 2);
    CHECK(sources[1].source == 3);
    CHECK(sources[2].source == 4);
}

TEST_CASE("validation passes on random graphs") {
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        Cpg g = testing::make_random_graph(12, 30, seed);
        CHECK_NOTHROW(g.validate());
    }
}

TEST_CASE("self loop yields one base and one reversed entry") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 1;
    n.node_type = reg.node_type_checked("CALL");
    g.add_node(n);
    TypeId cfg = reg.edge_type_checked("CFG");
    g.add_edge({1, 1, cfg, "true"});
    auto sources = g.incident_sources(1);
    REQUIRE(sources.size() == 2);
    CHECK(sources[0].reversed != sources[1].reversed);
}
