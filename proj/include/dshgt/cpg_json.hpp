#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dshgt/hetgraph.hpp"

namespace dshgt {

using AnnotationMap = std::map<NodeId, std::vector<std::string>>;

// A graph plus the method annotations extracted alongside it. `method` is set
// on documents holding a single sliced method, so importers can find the root
// without scanning.
struct CpgBundle {
    Cpg graph;
    AnnotationMap annotations;
    std::optional<NodeId> method;
};

// Serializes to the "dshgt-cpg/1" interchange format: deterministic field
// order, nodes sorted by id, edges by (src, dst, type, label). Two exports of
// the same graph are byte-identical.
inline nlohmann::ordered_json export_cpg(const CpgBundle& bundle) {
    const Cpg& g = bundle.graph;
    nlohmann::ordered_json doc;
    doc["version"] = kCpgFormatVersion;
    doc["registry"] = {
        {"node_types", g.registry().node_type_names()},
        {"edge_types", g.registry().edge_type_names()},
    };
    if (bundle.method) doc["method"] = *bundle.method;

    std::vector<const CpgNode*> nodes;
    nodes.reserve(g.nodes().size());
    for (const auto& n : g.nodes()) nodes.push_back(&n);
    std::sort(nodes.begin(), nodes.end(),
              [](const CpgNode* a, const CpgNode* b) { return a->id < b->id; });

    nlohmann::ordered_json node_arr = nlohmann::ordered_json::array();
    for (const CpgNode* n : nodes) {
        nlohmann::ordered_json rec;
        rec["id"] = n->id;
        rec["type"] = g.registry().node_type_name(n->node_type);
        rec["code"] = n->code;
        if (!n->name.empty()) rec["name"] = n->name;
        if (n->line > 0) rec["line"] = n->line;
        if (!n->file.empty()) rec["file"] = n->file;
        node_arr.push_back(std::move(rec));
    }
    doc["nodes"] = std::move(node_arr);

    std::vector<const CpgEdge*> edges;
    edges.reserve(g.edges().size());
    for (const auto& e : g.edges()) edges.push_back(&e);
    std::sort(edges.begin(), edges.end(), [](const CpgEdge* a, const CpgEdge* b) {
        return std::tie(a->src, a->dst, a->edge_type, a->label) <
               std::tie(b->src, b->dst, b->edge_type, b->label);
    });

    nlohmann::ordered_json edge_arr = nlohmann::ordered_json::array();
    for (const CpgEdge* e : edges) {
        nlohmann::ordered_json rec;
        rec["src"] = e->src;
        rec["dst"] = e->dst;
        rec["type"] = g.registry().edge_type_name(e->edge_type);
        if (!e->label.empty()) rec["label"] = e->label;
        edge_arr.push_back(std::move(rec));
    }
    doc["edges"] = std::move(edge_arr);

    nlohmann::ordered_json ann = nlohmann::ordered_json::object();
    for (const auto& [id, tokens] : bundle.annotations) {
        ann[std::to_string(id)] = tokens;
    }
    doc["annotations"] = std::move(ann);
    return doc;
}

inline std::string export_cpg_string(const CpgBundle& bundle) {
    return export_cpg(bundle).dump(2) + "\n";
}

// Parses a "dshgt-cpg/1" document. Type names resolve against the builtin
// registry; unknown names are appended to it in document order.
inline CpgBundle import_cpg(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError("cpg document: expected a JSON object");
    if (!doc.contains("version") || !doc["version"].is_string())
        throw SchemaError("cpg document: missing version");
    if (doc["version"].get<std::string>() != kCpgFormatVersion)
        throw SchemaError("cpg document: version mismatch, expected " +
                          std::string(kCpgFormatVersion) + " got " +
                          doc["version"].get<std::string>());

    TypeRegistry registry;
    if (doc.contains("registry")) {
        const auto& reg = doc["registry"];
        if (!reg.is_object()) throw SchemaError("cpg document: registry must be an object");
        if (reg.contains("node_types"))
            for (const auto& n : reg["node_types"]) registry.add_node_type(n.get<std::string>());
        if (reg.contains("edge_types"))
            for (const auto& e : reg["edge_types"]) registry.add_edge_type(e.get<std::string>());
    }

    CpgBundle bundle{Cpg(registry), {}, std::nullopt};
    Cpg& g = bundle.graph;

    if (!doc.contains("nodes") || !doc["nodes"].is_array())
        throw SchemaError("cpg document: missing nodes array");
    for (const auto& rec : doc["nodes"]) {
        CpgNode n;
        if (!rec.contains("id") || !rec["id"].is_number_integer())
            throw SchemaError("cpg document: node without integer id");
        n.id = rec["id"].get<NodeId>();
        if (n.id < 0) throw SchemaError("cpg document: negative node id");
        if (!rec.contains("type")) throw SchemaError("cpg document: node without type");
        const std::string type_name = rec["type"].get<std::string>();
        auto t = g.registry().node_type(type_name);
        if (!t) throw SchemaError("cpg document: node type not declared: " + type_name);
        n.node_type = *t;
        if (rec.contains("code")) n.code = rec["code"].get<std::string>();
        if (rec.contains("name")) n.name = rec["name"].get<std::string>();
        if (rec.contains("line")) n.line = rec["line"].get<int>();
        if (rec.contains("file")) n.file = rec["file"].get<std::string>();
        try {
            g.add_node(std::move(n));
        } catch (const GraphError& e) {
            throw SchemaError(std::string("cpg document: ") + e.what());
        }
    }

    if (doc.contains("edges")) {
        if (!doc["edges"].is_array()) throw SchemaError("cpg document: edges must be an array");
        for (const auto& rec : doc["edges"]) {
            CpgEdge e;
            if (!rec.contains("src") || !rec.contains("dst"))
                throw SchemaError("cpg document: edge without endpoints");
            e.src = rec["src"].get<NodeId>();
            e.dst = rec["dst"].get<NodeId>();
            if (!rec.contains("type")) throw SchemaError("cpg document: edge without type");
            const std::string type_name = rec["type"].get<std::string>();
            auto t = g.registry().edge_type(type_name);
            if (!t) throw SchemaError("cpg document: edge type not declared: " + type_name);
            e.edge_type = *t;
            if (rec.contains("label")) e.label = rec["label"].get<std::string>();
            try {
                g.add_edge(std::move(e));
            } catch (const GraphError& err) {
                throw SchemaError(std::string("cpg document: ") + err.what());
            }
        }
    }

    if (doc.contains("annotations")) {
        if (!doc["annotations"].is_object())
            throw SchemaError("cpg document: annotations must be an object");
        for (const auto& [key, tokens] : doc["annotations"].items()) {
            NodeId id;
            try {
                id = std::stoll(key);
            } catch (const std::exception&) {
                throw SchemaError("cpg document: annotation key is not a node id: " + key);
            }
            if (!g.has_node(id))
                throw SchemaError("cpg document: annotation references missing node " + key);
            bundle.annotations[id] = tokens.get<std::vector<std::string>>();
        }
    }

    if (doc.contains("method")) {
        NodeId m = doc["method"].get<NodeId>();
        if (!g.has_node(m))
            throw SchemaError("cpg document: method field references missing node");
        bundle.method = m;
    }
    return bundle;
}

inline CpgBundle import_cpg_string(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("cpg document: invalid JSON: ") + e.what());
    }
    return import_cpg(doc);
}

}  // namespace dshgt
