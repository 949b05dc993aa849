#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dshgt/cpg_json.hpp"
#include "dshgt/hetgraph.hpp"

namespace dshgt {

// One method's sliced subgraph: the method node plus everything reachable
// forward over outgoing edges and backward over incoming edges, ids preserved.
struct MethodCpg {
    NodeId method_node = 0;
    Cpg graph;
    std::vector<std::string> annotation;
    std::optional<int> label;
    std::string file;
    int line = 0;
};

struct SymbolMap {
    std::map<std::string, std::string> method_renames;  // original -> METHODn
    std::map<std::string, std::string> var_renames;     // original -> VARn
    bool empty() const { return method_renames.empty() && var_renames.empty(); }
};

struct SliceOptions {
    // Edge types excluded from both traversals; empty means follow everything.
    std::set<TypeId> excluded_edge_types;
};

namespace detail {

inline void slice_dfs(const Cpg& g, NodeId start, bool forward, const SliceOptions& opt,
                      std::set<NodeId>& visited) {
    std::vector<NodeId> stack{start};
    while (!stack.empty()) {
        NodeId n = stack.back();
        stack.pop_back();
        if (!visited.insert(n).second) continue;
        const auto& idxs = forward ? g.out_edges(n) : g.in_edges(n);
        // push in reverse so neighbors are expanded in edge insertion order
        for (auto it = idxs.rbegin(); it != idxs.rend(); ++it) {
            const CpgEdge& e = g.edges()[*it];
            if (opt.excluded_edge_types.count(e.edge_type)) continue;
            stack.push_back(forward ? e.dst : e.src);
        }
    }
}

}  // namespace detail

// Visited set of one slice: {m} plus forward reachability over outgoing edges
// plus backward reachability over incoming edges, each fully transitive.
inline std::set<NodeId> slice_visited(const Cpg& g, NodeId method,
                                      const SliceOptions& opt = {}) {
    std::set<NodeId> visited;
    detail::slice_dfs(g, method, true, opt, visited);
    std::set<NodeId> back;
    detail::slice_dfs(g, method, false, opt, back);
    visited.insert(back.begin(), back.end());
    return visited;
}

inline Cpg induced_subgraph(const Cpg& g, const std::set<NodeId>& keep) {
    Cpg sub(g.registry());
    for (const CpgNode& n : g.nodes())
        if (keep.count(n.id)) sub.add_node(n);
    for (const CpgEdge& e : g.edges())
        if (keep.count(e.src) && keep.count(e.dst)) sub.add_edge(e);
    return sub;
}

// One MethodCpg per METHOD node, in node order. Slices are materialized
// copies, so each result can be mutated independently.
inline std::vector<MethodCpg> slice_methods(const Cpg& g, const AnnotationMap& annotations = {},
                                            const SliceOptions& opt = {}) {
    const TypeRegistry& reg = g.registry();
    auto method_type = reg.node_type("METHOD");
    std::vector<MethodCpg> out;
    if (!method_type) return out;
    for (const CpgNode& n : g.nodes()) {
        if (n.node_type != *method_type) continue;
        MethodCpg m;
        m.method_node = n.id;
        m.graph = induced_subgraph(g, slice_visited(g, n.id, opt));
        auto it = annotations.find(n.id);
        if (it != annotations.end()) m.annotation = it->second;
        m.file = n.file;
        m.line = n.line;
        out.push_back(std::move(m));
    }
    return out;
}

namespace detail {

inline bool is_operator_name(const std::string& name) {
    return name.rfind("<operator>", 0) == 0;
}

// Replaces whole identifier tokens of `code` according to the rename map.
inline std::string rewrite_code(const std::string& code,
                                const std::map<std::string, std::string>& renames) {
    std::string out;
    out.reserve(code.size());
    std::size_t i = 0;
    auto is_start = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    };
    auto is_part = [&](char c) { return is_start(c) || (c >= '0' && c <= '9'); };
    while (i < code.size()) {
        if (is_start(code[i])) {
            std::size_t start = i;
            while (i < code.size() && is_part(code[i])) ++i;
            std::string word = code.substr(start, i - start);
            auto it = renames.find(word);
            out += it == renames.end() ? word : it->second;
        } else {
            out += code[i++];
        }
    }
    return out;
}

}  // namespace detail

// Canonical renaming of user identifiers: function names become METHODn and
// variable names VARn, numbered by first occurrence in ascending node id
// order. Keywords, operator call names and literals are untouched; calls to
// functions with no METHOD node in the slice (library calls) keep their name.
inline SymbolMap symbolize(MethodCpg& m) {
    Cpg& g = m.graph;
    const TypeRegistry& reg = g.registry();
    auto type_of = [&](const char* name) { return reg.node_type(name); };
    auto t_method = type_of("METHOD");
    auto t_call = type_of("CALL");
    auto t_local = type_of("LOCAL");
    auto t_param = type_of("METHOD_PARAMETER_IN");
    auto t_ident = type_of("IDENTIFIER");

    std::set<std::string> user_methods;
    for (const CpgNode& n : g.nodes()) {
        if (t_method && n.node_type == *t_method && !n.name.empty() &&
            !detail::is_operator_name(n.name))
            user_methods.insert(n.name);
    }

    SymbolMap sm;
    std::vector<NodeId> order = g.sorted_node_ids();
    int next_method = 1, next_var = 1;
    for (NodeId id : order) {
        const CpgNode& n = g.node(id);
        if (n.name.empty() || detail::is_operator_name(n.name)) continue;
        bool is_method_name =
            (t_method && n.node_type == *t_method) ||
            (t_call && n.node_type == *t_call && user_methods.count(n.name));
        bool is_var_name = (t_local && n.node_type == *t_local) ||
                           (t_param && n.node_type == *t_param) ||
                           (t_ident && n.node_type == *t_ident);
        if (is_method_name) {
            if (!sm.method_renames.count(n.name))
                sm.method_renames[n.name] = "METHOD" + std::to_string(next_method++);
        } else if (is_var_name) {
            if (!sm.var_renames.count(n.name))
                sm.var_renames[n.name] = "VAR" + std::to_string(next_var++);
        }
    }

    std::map<std::string, std::string> combined = sm.var_renames;
    combined.insert(sm.method_renames.begin(), sm.method_renames.end());
    if (combined.empty()) return sm;

    for (NodeId id : order) {
        CpgNode& n = g.node_mut(id);
        auto it = combined.find(n.name);
        if (it != combined.end()) n.name = it->second;
        n.code = detail::rewrite_code(n.code, combined);
    }

    // REACHING_DEF labels carry variable names; keep them in sync.
    for (CpgEdge& e : g.edges_mut()) {
        auto it = sm.var_renames.find(e.label);
        if (it != sm.var_renames.end()) e.label = it->second;
    }
    return sm;
}

// Serialization helpers for sliced methods (same dshgt-cpg/1 format, with the
// root method recorded).
inline CpgBundle to_bundle(const MethodCpg& m) {
    CpgBundle b;
    b.graph = m.graph;
    if (!m.annotation.empty()) b.annotations[m.method_node] = m.annotation;
    b.method = m.method_node;
    return b;
}

inline MethodCpg from_bundle(const CpgBundle& b) {
    MethodCpg m;
    m.graph = b.graph;
    NodeId method = 0;
    if (b.method) {
        method = *b.method;
    } else {
        auto t_method = m.graph.registry().node_type("METHOD");
        if (t_method) {
            NodeId best = -1;
            for (const CpgNode& n : m.graph.nodes())
                if (n.node_type == *t_method && (best < 0 || n.id < best)) best = n.id;
            method = best < 0 ? 0 : best;
        }
        if (method == 0) throw SchemaError("cpg document contains no METHOD node");
    }
    m.method_node = method;
    auto it = b.annotations.find(method);
    if (it != b.annotations.end()) m.annotation = it->second;
    const CpgNode& mn = m.graph.node(method);
    m.file = mn.file;
    m.line = mn.line;
    return m;
}

}  // namespace dshgt
