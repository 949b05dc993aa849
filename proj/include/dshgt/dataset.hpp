#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dshgt/cpg_json.hpp"
#include "dshgt/method_cpg.hpp"
#include "dshgt/minic/cpg_builder.hpp"

namespace dshgt {

// One labeled training unit: a symbolized method slice plus its label and
// optional annotation tokens.
struct Sample {
    std::string id;
    std::string language = "c";
    MethodCpg method;
    int label = 0;
    std::string cwe;
    std::vector<std::string> annotation;
};

struct IngestResult {
    std::vector<Sample> samples;
    std::vector<std::string> skipped;  // "id: reason" for frontend/import failures
    TypeRegistry registry;             // builtin plus every extension encountered
};

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw SchemaError("cannot read file: " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Picks the slice for one record: the document's declared method if present,
// otherwise the method with the smallest node id.
inline MethodCpg pick_method(const CpgBundle& bundle) {
    auto methods = slice_methods(bundle.graph, bundle.annotations);
    if (methods.empty()) throw SchemaError("source contains no method");
    if (bundle.method) {
        for (MethodCpg& m : methods)
            if (m.method_node == *bundle.method) return std::move(m);
        throw SchemaError("declared method node not found in graph");
    }
    MethodCpg* best = &methods.front();
    for (MethodCpg& m : methods)
        if (m.method_node < best->method_node) best = &m;
    return std::move(*best);
}

}  // namespace detail

// Reads a JSONL manifest. Each record holds exactly one source form:
//   {"id": ..., "code": "..."} inline mini-C
//   {"id": ..., "path": "file.c"} mini-C on disk
//   {"id": ..., "cpg": "doc.json"} imported CPG document
// plus "label" (0/1) and optional "language", "cwe", "annotation".
// Relative paths resolve against the manifest directory. Records whose source
// fails to parse or import are skipped with a report entry; malformed records
// are fatal.
inline IngestResult ingest(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream is(manifest_path);
    if (!is) throw SchemaError("cannot read manifest: " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    IngestResult out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError(manifest_path + ":" + std::to_string(line_no) +
                              ": invalid JSON: " + e.what());
        }
        auto fail = [&](const std::string& msg) {
            throw SchemaError(manifest_path + ":" + std::to_string(line_no) + ": " + msg);
        };
        if (!rec.is_object()) fail("record must be an object");
        if (!rec.contains("id")) fail("record without id");
        std::string id = rec["id"].is_string() ? rec["id"].get<std::string>()
                                               : rec["id"].dump();
        int source_forms = int(rec.contains("code")) + int(rec.contains("path")) +
                           int(rec.contains("cpg"));
        if (source_forms != 1) fail("record '" + id + "' must carry exactly one of code|path|cpg");
        if (!rec.contains("label") || !rec["label"].is_number_integer())
            fail("record '" + id + "' without integer label");
        int label = rec["label"].get<int>();
        if (label != 0 && label != 1) fail("record '" + id + "' label must be 0 or 1");

        Sample s;
        s.id = id;
        s.label = label;
        if (rec.contains("language")) s.language = rec["language"].get<std::string>();
        if (rec.contains("cwe")) s.cwe = rec["cwe"].get<std::string>();

        try {
            CpgBundle bundle;
            if (rec.contains("code")) {
                bundle = minic::parse_source(id + ".c", rec["code"].get<std::string>());
            } else if (rec.contains("path")) {
                fs::path p = base / rec["path"].get<std::string>();
                bundle = minic::parse_source(rec["path"].get<std::string>(),
                                             detail::read_file(p));
            } else {
                fs::path p = base / rec["cpg"].get<std::string>();
                bundle = import_cpg_string(detail::read_file(p));
            }
            for (const std::string& n : bundle.graph.registry().node_type_names())
                out.registry.add_node_type(n);
            for (const std::string& e : bundle.graph.registry().edge_type_names())
                out.registry.add_edge_type(e);
            s.method = detail::pick_method(bundle);
            symbolize(s.method);
        } catch (const ParseError& e) {
            out.skipped.push_back(id + ": " + e.what());
            continue;
        } catch (const SchemaError& e) {
            out.skipped.push_back(id + ": " + e.what());
            continue;
        } catch (const GraphError& e) {
            out.skipped.push_back(id + ": " + e.what());
            continue;
        }
        if (rec.contains("annotation")) {
            s.annotation = rec["annotation"].get<std::vector<std::string>>();
        } else {
            s.annotation = s.method.annotation;
        }
        s.method.label = s.label;
        out.samples.push_back(std::move(s));
    }
    if (out.samples.empty())
        throw SchemaError(manifest_path + ": zero usable samples (" +
                          std::to_string(out.skipped.size()) + " skipped)");
    return out;
}

// Stratified split: per class, a seeded shuffle then a round(ratio * n) cut.
// Disjoint and exhaustive; deterministic under the seed.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split(
    const std::vector<Sample>& samples, double ratio, std::uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0)
        throw ConfigError("split ratio must lie strictly between 0 and 1");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (samples[i].label == 1 ? pos : neg).push_back(i);
    if (pos.size() < 2 || neg.size() < 2)
        throw ConfigError("split requires at least 2 samples per class (have " +
                          std::to_string(pos.size()) + " positive, " +
                          std::to_string(neg.size()) + " negative)");
    Rng rng(seed);
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (std::vector<std::size_t>* group : {&pos, &neg}) {
        rng.shuffle(*group);
        const auto n_train = static_cast<std::size_t>(
            std::llround(ratio * static_cast<double>(group->size())));
        for (std::size_t i = 0; i < group->size(); ++i)
            (i < n_train ? out.first : out.second).push_back(samples[(*group)[i]]);
    }
    return out;
}

}  // namespace dshgt
