#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dshgt/common.hpp"

namespace dshgt {

using NodeId = std::int64_t;
using TypeId = std::size_t;

// Node and edge type registries for the code property graph. Seeded with the
// full builtin CPG schema; user extensions append only, so indices are stable
// across serialization.
class TypeRegistry {
public:
    static const std::vector<std::string>& builtin_node_types() {
        static const std::vector<std::string> kinds = {
            "META_DATA", "FILE", "NAMESPACE", "NAMESPACE_BLOCK", "METHOD",
            "METHOD_PARAMETER_IN", "METHOD_PARAMETER_OUT", "METHOD_RETURN",
            "MEMBER", "TYPE", "TYPE_ARGUMENT", "TYPE_DECL", "TYPE_PARAMETER",
            "AST_NODE", "BLOCK", "CALL", "CALL_REPR", "CONTROL_STRUCTURE",
            "EXPRESSION", "FIELD_IDENTIFIER", "IDENTIFIER", "JUMP_LABEL",
            "JUMP_TARGET", "LITERAL", "LOCAL", "METHOD_REF", "MODIFIER",
            "RETURN", "TYPE_REF", "UNKNOWN", "CFG_NODE", "COMMENT", "FINDING",
            "KEY_VALUE_PAIR", "LOCATION", "TAG", "TAG_NODE_PAIR", "CONFIG_FILE",
            "BINDING", "ANNOTATION", "ANNOTATION_LITERAL", "ANNOTATION_PARAMETER",
            "ANNOTATION_PARAMETER_ASSIGN", "ARRAY_INITIALIZER", "DECLARATION",
        };
        return kinds;
    }

    static const std::vector<std::string>& builtin_edge_types() {
        static const std::vector<std::string> kinds = {
            "SOURCE_FILE", "ALIAS_OF", "BINDS_TO", "INHERITS_FROM", "AST",
            "CONDITION", "ARGUMENT", "CALL", "RECEIVER", "CFG", "DOMINATE",
            "POST_DOMINATE", "CDG", "REACHING_DEF", "CONTAINS", "EVAL_TYPE",
            "PARAMETER_LINK", "TAGGED_BY", "BINDS", "REF",
        };
        return kinds;
    }

    TypeRegistry() {
        for (const auto& n : builtin_node_types()) add_node_type(n);
        for (const auto& e : builtin_edge_types()) add_edge_type(e);
    }

    // Empty registry, for tests that want a tiny type universe.
    struct Empty {};
    explicit TypeRegistry(Empty) {}

    TypeId add_node_type(const std::string& name) {
        auto it = node_index_.find(name);
        if (it != node_index_.end()) return it->second;
        TypeId id = node_names_.size();
        node_names_.push_back(name);
        node_index_.emplace(name, id);
        return id;
    }

    TypeId add_edge_type(const std::string& name) {
        auto it = edge_index_.find(name);
        if (it != edge_index_.end()) return it->second;
        TypeId id = edge_names_.size();
        edge_names_.push_back(name);
        edge_index_.emplace(name, id);
        return id;
    }

    std::optional<TypeId> node_type(const std::string& name) const {
        auto it = node_index_.find(name);
        if (it == node_index_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<TypeId> edge_type(const std::string& name) const {
        auto it = edge_index_.find(name);
        if (it == edge_index_.end()) return std::nullopt;
        return it->second;
    }

    TypeId node_type_checked(const std::string& name) const {
        auto t = node_type(name);
        if (!t) throw GraphError("unknown node type: " + name);
        return *t;
    }

    TypeId edge_type_checked(const std::string& name) const {
        auto t = edge_type(name);
        if (!t) throw GraphError("unknown edge type: " + name);
        return *t;
    }

    const std::string& node_type_name(TypeId id) const { return node_names_.at(id); }
    const std::string& edge_type_name(TypeId id) const { return edge_names_.at(id); }

    std::size_t node_type_count() const { return node_names_.size(); }
    std::size_t edge_type_count() const { return edge_names_.size(); }

    // Incident edges traversed against their direction get a paired reversed
    // relation id so heterogeneity survives undirected neighborhood gathering.
    std::size_t relation_count() const { return 2 * edge_names_.size(); }

    TypeId reversed_relation(TypeId edge_type) const {
        return edge_names_.size() + edge_type;
    }

    const std::vector<std::string>& node_type_names() const { return node_names_; }
    const std::vector<std::string>& edge_type_names() const { return edge_names_; }

    bool operator==(const TypeRegistry& o) const {
        return node_names_ == o.node_names_ && edge_names_ == o.edge_names_;
    }

private:
    std::vector<std::string> node_names_;
    std::vector<std::string> edge_names_;
    std::unordered_map<std::string, TypeId> node_index_;
    std::unordered_map<std::string, TypeId> edge_index_;
};

struct CpgNode {
    NodeId id = 0;
    TypeId node_type = 0;
    std::string code;   // verbatim source snippet
    std::string name;   // empty when absent
    int line = 0;       // 1-based, 0 when absent
    std::string file;   // empty when absent
};

struct CpgEdge {
    NodeId src = 0;
    NodeId dst = 0;
    TypeId edge_type = 0;
    std::string label;  // e.g. variable name on REACHING_DEF, true/false on CDG
};

// One neighbor reached from a target node. `relation` distinguishes traversal
// direction: edges arriving at the target keep the base edge type, edges
// leaving it map to the reversed relation id (edge_type_count + type).
struct IncidentSource {
    NodeId source = 0;
    TypeId edge_type = 0;    // base edge type of the underlying edge
    bool reversed = false;   // true when the edge leaves the target
    TypeId relation = 0;     // edge_type, or reversed_relation(edge_type)
    std::size_t edge_index = 0;
};

// Typed multigraph of code entities. Construction is single-writer; once
// built, reads are safe from any number of threads.
class Cpg {
public:
    Cpg() = default;
    explicit Cpg(TypeRegistry registry) : registry_(std::move(registry)) {}

    TypeRegistry& registry() { return registry_; }
    const TypeRegistry& registry() const { return registry_; }

    NodeId add_node(CpgNode node) {
        if (node.node_type >= registry_.node_type_count())
            throw GraphError("unknown node type index " + std::to_string(node.node_type));
        if (node_pos_.count(node.id))
            throw GraphError("duplicate id " + std::to_string(node.id));
        node_pos_.emplace(node.id, nodes_.size());
        out_adj_.emplace(node.id, std::vector<std::size_t>{});
        in_adj_.emplace(node.id, std::vector<std::size_t>{});
        NodeId id = node.id;
        nodes_.push_back(std::move(node));
        return id;
    }

    std::size_t add_edge(CpgEdge edge) {
        if (edge.edge_type >= registry_.edge_type_count())
            throw GraphError("unknown edge type index " + std::to_string(edge.edge_type));
        if (!node_pos_.count(edge.src))
            throw GraphError("dangling endpoint " + std::to_string(edge.src));
        if (!node_pos_.count(edge.dst))
            throw GraphError("dangling endpoint " + std::to_string(edge.dst));
        for (std::size_t idx : out_adj_.at(edge.src)) {
            const CpgEdge& e = edges_[idx];
            if (e.dst == edge.dst && e.edge_type == edge.edge_type && e.label == edge.label)
                throw GraphError("duplicate parallel edge " + std::to_string(edge.src) + "->" +
                                 std::to_string(edge.dst) + " type " +
                                 registry_.edge_type_name(edge.edge_type));
        }
        std::size_t idx = edges_.size();
        out_adj_[edge.src].push_back(idx);
        in_adj_[edge.dst].push_back(idx);
        edges_.push_back(std::move(edge));
        return idx;
    }

    bool has_node(NodeId id) const { return node_pos_.count(id) != 0; }

    const CpgNode& node(NodeId id) const {
        auto it = node_pos_.find(id);
        if (it == node_pos_.end()) throw GraphError("unknown node " + std::to_string(id));
        return nodes_[it->second];
    }

    CpgNode& node_mut(NodeId id) {
        auto it = node_pos_.find(id);
        if (it == node_pos_.end()) throw GraphError("unknown node " + std::to_string(id));
        return nodes_[it->second];
    }

    const std::vector<CpgNode>& nodes() const { return nodes_; }
    const std::vector<CpgEdge>& edges() const { return edges_; }

    // Label rewriting (e.g. symbolization) may edit labels in place; it must
    // keep (src, dst, type, label) tuples unique.
    std::vector<CpgEdge>& edges_mut() { return edges_; }

    const std::vector<std::size_t>& out_edges(NodeId id) const {
        auto it = out_adj_.find(id);
        if (it == out_adj_.end()) throw GraphError("unknown node " + std::to_string(id));
        return it->second;
    }

    const std::vector<std::size_t>& in_edges(NodeId id) const {
        auto it = in_adj_.find(id);
        if (it == in_adj_.end()) throw GraphError("unknown node " + std::to_string(id));
        return it->second;
    }

    // All neighbors of t through any incident edge, either direction,
    // ordered by edge insertion order. A self-loop contributes two entries.
    std::vector<IncidentSource> incident_sources(NodeId t) const {
        const auto& in = in_edges(t);
        const auto& out = out_edges(t);
        std::vector<IncidentSource> result;
        result.reserve(in.size() + out.size());
        std::size_t i = 0, o = 0;
        while (i < in.size() || o < out.size()) {
            bool take_in = o >= out.size() || (i < in.size() && in[i] < out[o]);
            std::size_t idx = take_in ? in[i++] : out[o++];
            const CpgEdge& e = edges_[idx];
            IncidentSource s;
            s.edge_index = idx;
            s.edge_type = e.edge_type;
            if (take_in) {
                s.source = e.src;
                s.reversed = false;
                s.relation = e.edge_type;
            } else {
                s.source = e.dst;
                s.reversed = true;
                s.relation = registry_.reversed_relation(e.edge_type);
            }
            result.push_back(s);
        }
        return result;
    }

    // Full consistency pass: adjacency indexes agree with the edge list and
    // every endpoint resolves.
    void validate() const {
        std::size_t adj_total = 0;
        for (const auto& [id, idxs] : out_adj_) {
            adj_total += idxs.size();
            for (std::size_t idx : idxs) {
                if (idx >= edges_.size() || edges_[idx].src != id)
                    throw GraphError("out adjacency inconsistent at node " + std::to_string(id));
            }
        }
        if (adj_total != edges_.size()) throw GraphError("out adjacency does not cover edge list");
        adj_total = 0;
        for (const auto& [id, idxs] : in_adj_) {
            adj_total += idxs.size();
            for (std::size_t idx : idxs) {
                if (idx >= edges_.size() || edges_[idx].dst != id)
                    throw GraphError("in adjacency inconsistent at node " + std::to_string(id));
            }
        }
        if (adj_total != edges_.size()) throw GraphError("in adjacency does not cover edge list");
        for (const CpgEdge& e : edges_) {
            if (!node_pos_.count(e.src) || !node_pos_.count(e.dst))
                throw GraphError("dangling endpoint in edge list");
        }
    }

    // Node ids in ascending order; the canonical row order for feature matrices.
    std::vector<NodeId> sorted_node_ids() const {
        std::vector<NodeId> ids;
        ids.reserve(nodes_.size());
        for (const auto& n : nodes_) ids.push_back(n.id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

private:
    TypeRegistry registry_;
    std::vector<CpgNode> nodes_;
    std::vector<CpgEdge> edges_;
    std::unordered_map<NodeId, std::size_t> node_pos_;
    std::unordered_map<NodeId, std::vector<std::size_t>> out_adj_;
    std::unordered_map<NodeId, std::vector<std::size_t>> in_adj_;
};

}  // namespace dshgt
