#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dshgt/common.hpp"

namespace dshgt {

// Deterministic mini-C corpus generator with planted vulnerability patterns.
// Patterns mirror divide-by-zero, runaway iteration and dangerous-call
// archetypes; distractor statements vary per sample so graphs stay
// distinguishable after symbolization.
struct SynthOptions {
    std::string pattern = "cwe369";  // cwe369 | cwe834 | cwe676
    int count = 20;
    std::uint64_t seed = 1;
};

struct SynthCorpus {
    std::vector<std::pair<std::string, std::string>> files;  // (name, content)
    std::string manifest;                                    // JSONL referencing the files
};

namespace detail {

inline std::string pick(Rng& rng, const std::vector<std::string>& options) {
    return options[rng.uniform_int(options.size())];
}

inline std::string lit(Rng& rng, int lo, int hi) {
    return std::to_string(lo + static_cast<int>(rng.uniform_int(
                                   static_cast<std::uint64_t>(hi - lo + 1))));
}

// Label-independent noise around the planted pattern. Each sample gets its
// own spread of constants and statement mix, so graphs stay distinguishable
// after symbolization.
inline std::string distractors(Rng& rng, const std::string& var, int indent_spaces) {
    const std::string ind(indent_spaces, ' ');
    std::string out;
    // a per-sample tag constant gives every function an idiosyncratic literal
    out += ind + "int " + var + "tag = " + lit(rng, 10000, 99999) + ";\n";
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    for (int i = 0; i < k; ++i) {
        switch (rng.uniform_int(5)) {
            case 0:
                out += ind + var + " = " + var + " * " + lit(rng, 2, 9) + " + " +
                       lit(rng, 1, 9999) + ";\n";
                break;
            case 1:
                out += ind + "if (" + var + " > " + lit(rng, 10, 9000) + ") {\n" + ind + "    " +
                       var + " = " + var + " - " + lit(rng, 1, 999) + ";\n" + ind + "}\n";
                break;
            case 2:
                out += ind + var + " = " + var + " + " + lit(rng, 1, 9999) + ";\n";
                break;
            case 3:
                out += ind + var + "tag = " + var + "tag + " + var + " * " + lit(rng, 2, 99) +
                       ";\n";
                break;
            default: {
                std::string j = var + "j";
                out += ind + "for (" + j + " = 0; " + j + " < " + lit(rng, 2, 6) + "; " + j +
                       " = " + j + " + 1) {\n" + ind + "    " + var + " = " + var + " + " + j +
                       " + " + lit(rng, 1, 999) + ";\n" + ind + "}\n";
                break;
            }
        }
    }
    return out;
}

struct SampleText {
    std::string code;
    std::string cwe;
};

inline SampleText gen_cwe369(Rng& rng, const std::string& fn, bool bad) {
    const std::string note =
        bad ? pick(rng, {"// divides the value by the divisor without checking for zero",
                         "// performs the division even when the divisor may be zero"})
            : pick(rng, {"// guards the divisor against zero before dividing",
                         "// checks the divisor and only divides when it is nonzero"});
    std::string body;
    body += "    int acc = " + lit(rng, 1, 40) + ";\n";
    body += "    int accj = 0;\n";
    body += distractors(rng, "acc", 4);
    if (bad) {
        body += "    acc = value / divisor;\n";
    } else {
        body += "    if (divisor != 0) {\n";
        body += "        acc = value / divisor;\n";
        body += "    }\n";
    }
    body += "    return acc;\n";
    SampleText out;
    out.code = note + "\nint " + fn + "(int value, int divisor) {\n" + body + "}\n";
    out.cwe = "CWE-369";
    return out;
}

inline SampleText gen_cwe834(Rng& rng, const std::string& fn, bool bad) {
    const std::string note =
        bad ? pick(rng, {"// loops over the counter but never advances it",
                         "// iterates without making progress toward the bound"})
            : pick(rng, {"// advances the loop counter toward the bound each pass",
                         "// bounded loop that increments its counter"});
    std::string body;
    body += "    int total = 0;\n";
    body += "    int totalj = 0;\n";
    body += "    int step = " + lit(rng, 1, 3) + ";\n";
    body += distractors(rng, "total", 4);
    body += "    while (step < bound) {\n";
    body += "        total = total + step;\n";
    if (!bad) body += "        step = step + 1;\n";
    body += "    }\n";
    body += "    return total;\n";
    SampleText out;
    out.code = note + "\nint " + fn + "(int bound) {\n" + body + "}\n";
    out.cwe = "CWE-834";
    return out;
}

inline SampleText gen_cwe676(Rng& rng, const std::string& fn, bool bad) {
    const std::string note =
        bad ? pick(rng, {"// copies the input with an unbounded library routine",
                         "// calls a dangerous function that ignores the buffer size"})
            : pick(rng, {"// copies the input with an explicitly bounded routine",
                         "// uses the size-checked variant for the copy"});
    const std::string size = lit(rng, 8, 64);
    std::string body;
    body += "    int buffer[" + size + "];\n";
    body += "    int used = 0;\n";
    body += "    int usedj = 0;\n";
    body += distractors(rng, "used", 4);
    if (bad) {
        body += "    " + pick(rng, {"gets", "strcpy", "sprintf"}) + "(buffer, input);\n";
    } else {
        body += "    " + pick(rng, {"fgets", "strncpy", "snprintf"}) + "(buffer, " + size +
                ", input);\n";
    }
    body += "    used = buffer[0];\n";
    body += "    return used;\n";
    SampleText out;
    out.code = note + "\nint " + fn + "(int input) {\n" + body + "}\n";
    out.cwe = "CWE-676";
    return out;
}

}  // namespace detail

inline SynthCorpus synthesize(const SynthOptions& opt) {
    if (opt.pattern != "cwe369" && opt.pattern != "cwe834" && opt.pattern != "cwe676")
        throw ConfigError("unknown synth pattern '" + opt.pattern + "'");
    if (opt.count < 1) throw ConfigError("synth count must be positive");
    Rng rng(opt.seed);
    SynthCorpus corpus;
    const std::vector<std::string> stems = {"process", "handle",  "update", "scan",
                                            "convert", "collect", "merge",  "route"};
    for (int i = 0; i < opt.count; ++i) {
        const bool bad = i % 2 == 0;
        char idx[16];
        std::snprintf(idx, sizeof idx, "%04d", i);
        const std::string id = opt.pattern + "_" + idx;
        const std::string fn = detail::pick(rng, stems) + "_" +
                               std::to_string(rng.uniform_int(10000));
        detail::SampleText text;
        if (opt.pattern == "cwe369")
            text = detail::gen_cwe369(rng, fn, bad);
        else if (opt.pattern == "cwe834")
            text = detail::gen_cwe834(rng, fn, bad);
        else
            text = detail::gen_cwe676(rng, fn, bad);

        const std::string file = id + ".c";
        corpus.files.emplace_back(file, text.code);
        nlohmann::ordered_json rec;
        rec["id"] = id;
        rec["language"] = "c";
        rec["path"] = file;
        rec["label"] = bad ? 1 : 0;
        rec["cwe"] = text.cwe;
        corpus.manifest += rec.dump() + "\n";
    }
    return corpus;
}

inline std::string write_corpus(const SynthCorpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& [name, content] : corpus.files) {
        std::ofstream os(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
        if (!os) throw SchemaError("cannot write corpus file: " + name);
        os << content;
    }
    const std::string manifest_path = (fs::path(dir) / "manifest.jsonl").string();
    std::ofstream os(manifest_path, std::ios::binary | std::ios::trunc);
    if (!os) throw SchemaError("cannot write manifest");
    os << corpus.manifest;
    return manifest_path;
}

}  // namespace dshgt
