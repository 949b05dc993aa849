#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "dshgt/method_cpg.hpp"
#include "dshgt/minic/cpg_builder.hpp"
#include "support/test_graphs.hpp"

using namespace dshgt;

TEST_CASE("slicing the sample method visits the documented node set") {
    Cpg g = testing::make_two_method_graph();
    std::set<NodeId> visited = slice_visited(g, 3);
    CHECK(visited == std::set<NodeId>{1, 3, 6, 7, 8, 11, 13, 14, 15});
}

TEST_CASE("slice of a graph holding a single method node") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 42;
    n.node_type = reg.node_type_checked("METHOD");
    g.add_node(n);
    auto methods = slice_methods(g);
    REQUIRE(methods.size() == 1);
    CHECK(methods[0].method_node == 42);
    CHECK(methods[0].graph.nodes().size() == 1);
}

TEST_CASE("graph without method nodes slices to nothing") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 1;
    n.node_type = reg.node_type_checked("CALL");
    g.add_node(n);
    CHECK(slice_methods(g).empty());
}

TEST_CASE("visited sets equal brute-force reachability closures") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Cpg g = testing::make_random_graph(20, 32, seed);
        for (const CpgNode& n : g.nodes()) {
            CAPTURE(seed, n.id);
            CHECK(slice_visited(g, n.id) == testing::closure_visited(g, n.id));
        }
    }
}

TEST_CASE("random graphs up to fifty nodes agree with the closure oracle") {
    for (std::uint64_t seed = 100; seed < 112; ++seed) {
        std::size_t n = 10 + seed % 41;  // 10..50
        Cpg g = testing::make_random_graph(n, 2 * n, seed);
        for (const CpgNode& node : g.nodes()) {
            if (node.id % 7 != 1) continue;  // sample a few roots per graph
            CAPTURE(seed, node.id);
            CHECK(slice_visited(g, node.id) == testing::closure_visited(g, node.id));
        }
    }
}

TEST_CASE("slicing preserves node ids, types and edges of the induced subgraph") {
    Cpg g = testing::make_two_method_graph();
    auto methods = slice_methods(g);
    REQUIRE(methods.size() == 2);
    for (const MethodCpg& m : methods) {
        for (const CpgNode& n : m.graph.nodes()) {
            const CpgNode& orig = g.node(n.id);
            CHECK(n.node_type == orig.node_type);
            CHECK(n.code == orig.code);
        }
        // every original edge between kept nodes is kept
        std::set<NodeId> kept;
        for (const CpgNode& n : m.graph.nodes()) kept.insert(n.id);
        std::size_t expect = 0;
        for (const CpgEdge& e : g.edges())
            if (kept.count(e.src) && kept.count(e.dst)) ++expect;
        CHECK(m.graph.edges().size() == expect);
    }
}

TEST_CASE("edge type exclusions shrink the slice") {
    Cpg g = testing::make_two_method_graph();
    SliceOptions opt;
    opt.excluded_edge_types.insert(g.registry().edge_type_checked("AST"));
    std::set<NodeId> visited = slice_visited(g, 3, opt);
    CHECK(visited == std::set<NodeId>{3});
}

TEST_CASE("annotations are copied onto the owning slice") {
    Cpg g = testing::make_two_method_graph();
    AnnotationMap ann;
    ann[3] = {"checks", "the", "input"};
    auto methods = slice_methods(g, ann);
    for (const MethodCpg& m : methods) {
        if (m.method_node == 3)
            CHECK(m.annotation == std::vector<std::string>{"checks", "the", "input"});
        else
            CHECK(m.annotation.empty());
    }
}

namespace {

MethodCpg first_method(const std::string& src) {
    CpgBundle b = minic::parse_source("t.c", src);
    auto methods = slice_methods(b.graph, b.annotations);
    REQUIRE_FALSE(methods.empty());
    return methods.front();
}

}  // namespace

TEST_CASE("symbolization renames user functions and variables in order") {
    MethodCpg m = first_method(
        "int readData(int x){return writeData(x) + x;}\n"
        "int writeData(int y){return y;}");
    SymbolMap sm = symbolize(m);
    REQUIRE(sm.method_renames.count("readData"));
    REQUIRE(sm.method_renames.count("writeData"));
    CHECK(sm.method_renames.at("readData") == "METHOD1");
    CHECK(sm.method_renames.at("writeData") == "METHOD2");
    REQUIRE(sm.var_renames.count("x"));
    CHECK(sm.var_renames.at("x") == "VAR1");
    CHECK(sm.var_renames.at("y") == "VAR2");

    // node text fields carry the canonical names, library markers stay
    bool saw_method1 = false;
    for (const CpgNode& n : m.graph.nodes()) {
        CHECK(n.code.find("readData") == std::string::npos);
        CHECK(n.name.find("readData") == std::string::npos);
        if (n.name == "METHOD1") saw_method1 = true;
    }
    CHECK(saw_method1);
}

TEST_CASE("library calls keep their names under symbolization") {
    MethodCpg m = first_method("int f(int n){ strcpy(n); return n; }");
    symbolize(m);
    bool saw_strcpy = false;
    for (const CpgNode& n : m.graph.nodes())
        if (n.name == "strcpy") saw_strcpy = true;
    CHECK(saw_strcpy);
}

TEST_CASE("keywords and literals survive symbolization") {
    MethodCpg m = first_method("int f(int count){ int total = 41; return total + count; }");
    symbolize(m);
    bool saw_literal = false;
    for (const CpgNode& n : m.graph.nodes()) {
        if (n.code == "41") saw_literal = true;
        // type keywords intact inside declaration snippets
        if (n.code.rfind("int ", 0) == 0) CHECK(n.code.find("int ") == 0);
    }
    CHECK(saw_literal);
}

TEST_CASE("method with no identifiers symbolizes to the identity") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 1;
    n.node_type = reg.node_type_checked("METHOD");
    n.code = "";
    g.add_node(n);
    MethodCpg m;
    m.method_node = 1;
    m.graph = g;
    SymbolMap sm = symbolize(m);
    CHECK(sm.empty());
}

TEST_CASE("symbolize is idempotent") {
    MethodCpg m = first_method("int f(int a, int b){ int c = a + b; return c; }");
    symbolize(m);
    std::string before = export_cpg_string(to_bundle(m));
    symbolize(m);
    CHECK(export_cpg_string(to_bundle(m)) == before);
}

TEST_CASE("symbolization keeps reaching-def labels consistent") {
    MethodCpg m = first_method("int f(int alpha){ int beta = alpha; return beta; }");
    SymbolMap sm = symbolize(m);
    TypeId rd = m.graph.registry().edge_type_checked("REACHING_DEF");
    for (const CpgEdge& e : m.graph.edges()) {
        if (e.edge_type != rd) continue;
        CHECK(e.label.rfind("VAR", 0) == 0);
    }
    CHECK(sm.var_renames.size() == 2);
}

TEST_CASE("alpha-equivalent methods symbolize to identical code multisets") {
    MethodCpg a = first_method("int f(int foo){ int bar = foo * 2; return bar; }");
    MethodCpg b = first_method("int f(int left){ int right = left * 2; return right; }");
    symbolize(a);
    symbolize(b);
    std::multiset<std::string> codes_a, codes_b;
    for (const CpgNode& n : a.graph.nodes()) codes_a.insert(n.code);
    for (const CpgNode& n : b.graph.nodes()) codes_b.insert(n.code);
    CHECK(codes_a == codes_b);
}

TEST_CASE("symbolization preserves topology exactly") {
    MethodCpg m = first_method("int f(int a){ if (a > 0) { a = a - 1; } return a; }");
    std::vector<CpgEdge> before = m.graph.edges();
    symbolize(m);
    REQUIRE(m.graph.edges().size() == before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(m.graph.edges()[i].src == before[i].src);
        CHECK(m.graph.edges()[i].dst == before[i].dst);
        CHECK(m.graph.edges()[i].edge_type == before[i].edge_type);
    }
}

TEST_CASE("method slices may share file-level nodes") {
    CpgBundle b = minic::parse_source(
        "t.c", "int shared = 1;\nint f(){return shared;}\nint h(){return shared;}");
    auto methods = slice_methods(b.graph, b.annotations);
    REQUIRE(methods.size() == 2);
    NodeId global = 0;
    TypeId t_local = b.graph.registry().node_type_checked("LOCAL");
    for (const CpgNode& n : b.graph.nodes())
        if (n.node_type == t_local && n.name == "shared") global = n.id;
    REQUIRE(global != 0);
    for (const MethodCpg& m : methods) CHECK(m.graph.has_node(global));
}
