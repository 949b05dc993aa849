#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "dshgt/cpg_json.hpp"
#include "dshgt/method_cpg.hpp"
#include "dshgt/minic/cpg_builder.hpp"
#include "support/defuse_oracle.hpp"
#include "support/test_graphs.hpp"

using namespace dshgt;
namespace fs = std::filesystem;

namespace {

const char* kTwoFunctionSample = R"(int g = 0;

// reads sensor data into the buffer
// and returns the element count
int readData(int n) {
    int x = 0;
    if (n > 0) {
        x = n + 1;
    } else {
        x = 0 - n;
    }
    return x;
}

void writeData(int v) {
    g = readData(v);
    emit(v);
}
)";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    void write(const std::string& file, const std::string& text) const {
        std::ofstream os(path / file);
        os << text;
    }
};

NodeId find_method(const Cpg& g, const std::string& name) {
    TypeId t = g.registry().node_type_checked("METHOD");
    for (const CpgNode& n : g.nodes())
        if (n.node_type == t && n.name == name) return n.id;
    FAIL("method not found: " << name);
    return 0;
}

std::vector<const CpgEdge*> edges_of_type(const Cpg& g, const char* type) {
    TypeId t = g.registry().edge_type_checked(type);
    std::vector<const CpgEdge*> out;
    for (const CpgEdge& e : g.edges())
        if (e.edge_type == t) out.push_back(&e);
    return out;
}

}  // namespace

TEST_CASE("two-function sample yields a predicate with true/false CFG edges") {
    CpgBundle b = minic::parse_source("sample.c", kTwoFunctionSample);
    const Cpg& g = b.graph;
    TypeId t_call = g.registry().node_type_checked("CALL");
    TypeId e_cfg = g.registry().edge_type_checked("CFG");

    bool found = false;
    for (const CpgNode& n : g.nodes()) {
        if (n.node_type != t_call || n.name != "<operator>.gt") continue;
        std::set<std::string> labels;
        for (std::size_t idx : g.out_edges(n.id))
            if (g.edges()[idx].edge_type == e_cfg) labels.insert(g.edges()[idx].label);
        if (labels == std::set<std::string>{"true", "false"}) found = true;
    }
    CHECK(found);
}

TEST_CASE("frontend emits the expected node and edge type inventory") {
    CpgBundle b = minic::parse_source("sample.c", kTwoFunctionSample);
    const Cpg& g = b.graph;
    std::set<std::string> node_types, edge_types;
    for (const CpgNode& n : g.nodes())
        node_types.insert(g.registry().node_type_name(n.node_type));
    for (const CpgEdge& e : g.edges())
        edge_types.insert(g.registry().edge_type_name(e.edge_type));
    for (const char* t : {"FILE", "METHOD", "METHOD_PARAMETER_IN", "METHOD_RETURN", "BLOCK",
                          "CALL", "CONTROL_STRUCTURE", "IDENTIFIER", "LITERAL", "LOCAL",
                          "RETURN", "COMMENT"})
        CHECK(node_types.count(t));
    for (const char* t : {"AST", "CFG", "CDG", "REACHING_DEF", "CALL", "ARGUMENT", "CONDITION",
                          "CONTAINS", "SOURCE_FILE", "REF"})
        CHECK(edge_types.count(t));
}

TEST_CASE("annotation block above a function becomes its tokens") {
    CpgBundle b = minic::parse_source("sample.c", kTwoFunctionSample);
    NodeId read_data = find_method(b.graph, "readData");
    REQUIRE(b.annotations.count(read_data));
    std::vector<std::string> expect = {"reads", "sensor", "data", "into", "the", "buffer",
                                       "and", "returns", "the", "element", "count"};
    CHECK(b.annotations.at(read_data) == expect);
    CHECK_FALSE(b.annotations.count(find_method(b.graph, "writeData")));
}

TEST_CASE("empty directory is an error") {
    TempDir dir("dshgt_frontend_empty");
    CHECK_THROWS_WITH(minic::parse_directory(dir.path.string()),
                      Catch::Matchers::ContainsSubstring("no source files"));
}

TEST_CASE("reaching definition from declaration to return") {
    CpgBundle b = minic::parse_source("t.c", "int f(){int x = 1; return x;}");
    const Cpg& g = b.graph;
    auto rd = edges_of_type(g, "REACHING_DEF");
    REQUIRE(rd.size() == 1);
    CHECK(rd[0]->label == "x");
    CHECK(g.node(rd[0]->src).code == "int x = 1");
    TypeId t_return = g.registry().node_type_checked("RETURN");
    CHECK(g.node(rd[0]->dst).node_type == t_return);
}

TEST_CASE("def-use edges match the path enumeration oracle") {
    const char* sources[] = {
        "int f(int n){int s = 0; int i = 0; while (i < n) { s = s + i; i = i + 1; } return s;}",
        "int f(int a, int b){int r = 0; if (a > b) { r = a; } else { r = b; } return r;}",
        "int g = 5;\nint f(int x){int y = g; g = x; return y + g;}",
        "int f(int n){int t = 0; for (t = 1; t < n; t = t + 1) { n = n - 1; } return t;}",
        "int f(int v){int a[4]; a[0] = v; a[1] = a[0] + 1; return a[1];}",
    };
    for (const char* src : sources) {
        CAPTURE(src);
        CpgBundle b = minic::parse_source("t.c", src);
        testing::DefUseOracle oracle(b.graph);
        CHECK(oracle.verify_method(find_method(b.graph, "f")));
    }
}

TEST_CASE("every CFG node reachable from entry reaches the exit") {
    const char* sources[] = {
        kTwoFunctionSample,
        "int f(int n){while (n > 0) { n = n - 1; } return n;}",
        "int f(int n){if (n > 0) { return 1; } return 0;}",
        "void f(){}",
        "int f(int n){for (n = 0; n < 3; n = n + 1) { emit(n); } return n;}",
    };
    for (const char* src : sources) {
        CAPTURE(src);
        CpgBundle b = minic::parse_source("t.c", src);
        const Cpg& g = b.graph;
        TypeId t_method = g.registry().node_type_checked("METHOD");
        TypeId t_ret = g.registry().node_type_checked("METHOD_RETURN");
        TypeId e_cfg = g.registry().edge_type_checked("CFG");
        for (const CpgNode& m : g.nodes()) {
            if (m.node_type != t_method) continue;
            NodeId exit = 0;
            for (std::size_t idx : g.out_edges(m.id)) {
                const CpgEdge& e = g.edges()[idx];
                if (g.node(e.dst).node_type == t_ret) exit = e.dst;
            }
            REQUIRE(exit != 0);
            std::set<NodeId> seen{m.id};
            std::vector<NodeId> stack{m.id};
            while (!stack.empty()) {
                NodeId n = stack.back();
                stack.pop_back();
                for (std::size_t idx : g.out_edges(n)) {
                    const CpgEdge& e = g.edges()[idx];
                    if (e.edge_type == e_cfg && seen.insert(e.dst).second) stack.push_back(e.dst);
                }
            }
            for (NodeId n : seen) {
                std::set<NodeId> fwd{n};
                std::vector<NodeId> st{n};
                bool ok = n == exit;
                while (!st.empty() && !ok) {
                    NodeId c = st.back();
                    st.pop_back();
                    for (std::size_t idx : g.out_edges(c)) {
                        const CpgEdge& e = g.edges()[idx];
                        if (e.edge_type != e_cfg) continue;
                        if (e.dst == exit) ok = true;
                        if (fwd.insert(e.dst).second) st.push_back(e.dst);
                    }
                }
                CHECK(ok);
            }
        }
    }
}

TEST_CASE("every CDG source has a CONDITION edge to its predicate") {
    CpgBundle b = minic::parse_source("sample.c", kTwoFunctionSample);
    const Cpg& g = b.graph;
    TypeId t_cs = g.registry().node_type_checked("CONTROL_STRUCTURE");
    TypeId e_cond = g.registry().edge_type_checked("CONDITION");
    auto cdg = edges_of_type(g, "CDG");
    REQUIRE_FALSE(cdg.empty());
    for (const CpgEdge* e : cdg) {
        CHECK(g.node(e->src).node_type == t_cs);
        bool has_condition = false;
        for (std::size_t idx : g.out_edges(e->src))
            if (g.edges()[idx].edge_type == e_cond) has_condition = true;
        CHECK(has_condition);
    }
}

TEST_CASE("export is deterministic and round-trips with identical ids") {
    CpgBundle b = minic::parse_source("sample.c", kTwoFunctionSample);
    std::string one = export_cpg_string(b);
    std::string two = export_cpg_string(b);
    CHECK(one == two);

    CpgBundle back = import_cpg_string(one);
    CHECK(back.graph.nodes().size() == b.graph.nodes().size());
    CHECK(back.graph.edges().size() == b.graph.edges().size());
    for (const CpgNode& n : b.graph.nodes()) {
        REQUIRE(back.graph.has_node(n.id));
        const CpgNode& m = back.graph.node(n.id);
        CHECK(m.node_type == n.node_type);
        CHECK(m.code == n.code);
        CHECK(m.name == n.name);
    }
    CHECK(export_cpg_string(back) == one);
    CHECK(back.annotations == b.annotations);
}

TEST_CASE("graph with zero edges exports a valid document") {
    TypeRegistry reg;
    Cpg g(reg);
    CpgNode n;
    n.id = 1;
    n.node_type = reg.node_type_checked("METHOD");
    g.add_node(n);
    CpgBundle b{std::move(g), {}, {}};
    std::string text = export_cpg_string(b);
    CpgBundle back = import_cpg_string(text);
    CHECK(back.graph.edges().empty());
    CHECK(back.graph.nodes().size() == 1);
}

TEST_CASE("the sample method slice exports nine node records") {
    Cpg g = testing::make_two_method_graph();
    Cpg sub = induced_subgraph(g, slice_visited(g, 3));
    CpgBundle sliced{std::move(sub), {}, 3};
    auto doc = export_cpg(sliced);
    CHECK(doc["nodes"].size() == 9);
}

TEST_CASE("document referencing a missing node fails to import") {
    std::string doc = R"({
      "version": "dshgt-cpg/1",
      "registry": {"node_types": [], "edge_types": []},
      "nodes": [{"id": 1, "type": "METHOD", "code": ""}],
      "edges": [{"src": 1, "dst": 7, "type": "AST"}]
    })";
    CHECK_THROWS_AS(import_cpg_string(doc), SchemaError);
}

TEST_CASE("unknown type names in the document registry extend the builtin one") {
    std::string doc = R"({
      "version": "dshgt-cpg/1",
      "registry": {"node_types": ["LAMBDA"], "edge_types": []},
      "nodes": [{"id": 1, "type": "LAMBDA", "code": ""}],
      "edges": []
    })";
    CpgBundle b = import_cpg_string(doc);
    CHECK(b.graph.registry().node_type_count() == TypeRegistry().node_type_count() + 1);
    CHECK(b.graph.registry().edge_type_count() == TypeRegistry().edge_type_count());
}

TEST_CASE("version mismatch is rejected") {
    std::string doc = R"({"version": "dshgt-cpg/2", "nodes": []})";
    CHECK_THROWS_WITH(import_cpg_string(doc),
                      Catch::Matchers::ContainsSubstring("version mismatch"));
}

TEST_CASE("parse errors carry file and line") {
    CHECK_THROWS_WITH(minic::parse_source("bad.c", "int f((){}"),
                      Catch::Matchers::ContainsSubstring("bad.c:1"));
    CHECK_THROWS_WITH(minic::parse_source("bad.c", "int f() {\n  struct x;\n}"),
                      Catch::Matchers::ContainsSubstring("unsupported construct 'struct'"));
    CHECK_THROWS_WITH(minic::parse_source("bad.c", "int f() { return y; }"),
                      Catch::Matchers::ContainsSubstring("undeclared identifier 'y'"));
    CHECK_THROWS_WITH(minic::parse_source("bad.c", "int f() { int x; int x; return 0; }"),
                      Catch::Matchers::ContainsSubstring("redeclaration"));
    CHECK_THROWS_WITH(minic::parse_source("bad.c", "int f(){return 0;} int f(){return 1;}"),
                      Catch::Matchers::ContainsSubstring("duplicate definition"));
}

TEST_CASE("directory parse merges files deterministically") {
    TempDir dir("dshgt_frontend_dir");
    dir.write("b.c", "int helperB(int x) { return x + 1; }");
    dir.write("a.c", "int helperA(int x) { return x * 2; }");
    CpgBundle b1 = minic::parse_directory(dir.path.string());
    CpgBundle b2 = minic::parse_directory(dir.path.string());
    CHECK(export_cpg_string(b1) == export_cpg_string(b2));
    NodeId a = find_method(b1.graph, "helperA");
    NodeId b = find_method(b1.graph, "helperB");
    CHECK(a < b);
}

TEST_CASE("user call sites link to the callee method") {
    CpgBundle b = minic::parse_source(
        "t.c", "int callee(int v){return v;}\nint caller(){return callee(3);}");
    auto calls = edges_of_type(b.graph, "CALL");
    REQUIRE(calls.size() == 1);
    CHECK(b.graph.node(calls[0]->dst).name == "callee");
    CHECK(b.graph.node(calls[0]->src).name == "callee");
}
