// Command-line surface for the CPG + heterogeneous-graph-transformer pipeline:
// graph construction, slicing, training, evaluation, prediction, transfer,
// gradient verification, and synthetic corpus generation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dshgt/checkpoint.hpp"
#include "dshgt/cpg_json.hpp"
#include "dshgt/dataset.hpp"
#include "dshgt/method_cpg.hpp"
#include "dshgt/minic/cpg_builder.hpp"
#include "dshgt/synth.hpp"
#include "dshgt/train.hpp"

namespace fs = std::filesystem;
using namespace dshgt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw SchemaError("cannot write " + path);
    os << text;
}

std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SchemaError("cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TrainFlags {
    std::string manifest;
    std::string config_path;
    std::string out;
    std::string metrics_out;
    // flag overrides; only applied when the user passed them
    std::optional<double> lr, split_ratio;
    std::optional<float> lambda, dropout;
    std::optional<int> epochs, batch;
    std::optional<std::int64_t> hidden_dim, feature_dim, layers, heads;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> embed_mode, aggregate, classifier;
    bool homogeneous = false;
    bool class_weighting = false;
};

TrainConfig resolve_config(const TrainFlags& f) {
    TrainConfig cfg;
    if (!f.config_path.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text(f.config_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError(f.config_path + ": invalid config JSON: " + e.what());
        }
        cfg = TrainConfig::from_json(j);
    }
    if (f.lr) cfg.lr = *f.lr;
    if (f.lambda) cfg.lambda = *f.lambda;
    if (f.dropout) cfg.dropout = *f.dropout;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.batch) cfg.batch = *f.batch;
    if (f.hidden_dim) cfg.hidden_dim = *f.hidden_dim;
    if (f.feature_dim) cfg.feature_dim = *f.feature_dim;
    if (f.layers) cfg.layers = *f.layers;
    if (f.heads) cfg.heads = *f.heads;
    if (f.seed) cfg.seed = *f.seed;
    if (f.split_ratio) cfg.split_ratio = *f.split_ratio;
    if (f.embed_mode) cfg.embed_mode = *f.embed_mode;
    if (f.aggregate) cfg.aggregate = *f.aggregate;
    if (f.classifier) cfg.classifier = *f.classifier;
    if (f.homogeneous) cfg.homogeneous = true;
    if (f.class_weighting) cfg.class_weighting = true;
    cfg.validate();
    return cfg;
}

int cmd_build_cpg(const std::string& dir, const std::string& out) {
    CpgBundle bundle = minic::parse_directory(dir);
    write_text(out, export_cpg_string(bundle));
    std::cerr << "wrote " << out << " (" << bundle.graph.nodes().size() << " nodes, "
              << bundle.graph.edges().size() << " edges)\n";
    return kExitOk;
}

int cmd_slice(const std::string& graph_path, const std::string& out_dir) {
    CpgBundle bundle = import_cpg_string(read_text(graph_path));
    auto methods = slice_methods(bundle.graph, bundle.annotations);
    fs::create_directories(out_dir);
    for (MethodCpg& m : methods) {
        symbolize(m);
        const std::string name = "method_" + std::to_string(m.method_node) + ".json";
        write_text((fs::path(out_dir) / name).string(), export_cpg_string(to_bundle(m)));
    }
    std::cerr << "wrote " << methods.size() << " method slices to " << out_dir << "\n";
    return kExitOk;
}

int cmd_train(const TrainFlags& flags) {
    TrainConfig cfg = resolve_config(flags);
    IngestResult data = ingest(flags.manifest);
    for (const std::string& s : data.skipped) std::cerr << "skipped " << s << "\n";

    auto [train_split, test_split] = split(data.samples, cfg.split_ratio, cfg.seed);
    std::cerr << "training on " << train_split.size() << " samples, holding out "
              << test_split.size() << "\n";

    Pipeline pipe = build_pipeline(data.registry, train_split, cfg);
    TrainResult tr = train(pipe, train_split);
    save_checkpoint(pipe, flags.out);

    nlohmann::ordered_json report;
    report["epochs"] = tr.epoch_losses.size();
    report["loss_trace"] = tr.epoch_losses;
    if (!test_split.empty()) {
        EvalResult ev = evaluate(pipe, test_split);
        report["test_metrics"] = ev.metrics.to_json();
    }
    const std::string text = report.dump(2) + "\n";
    std::cout << text;
    if (!flags.metrics_out.empty()) write_text(flags.metrics_out, text);
    return kExitOk;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest,
             const std::string& out_path) {
    Pipeline pipe = load_checkpoint(ckpt);
    IngestResult data = ingest(manifest);
    for (const std::string& s : data.skipped) std::cerr << "skipped " << s << "\n";
    EvalResult ev = evaluate(pipe, data.samples);
    const std::string text = ev.metrics.to_json().dump(2) + "\n";
    std::cout << text;
    if (!out_path.empty()) write_text(out_path, text);
    return kExitOk;
}

int cmd_predict(const std::string& ckpt, const std::string& source,
                const std::string& out_path) {
    Pipeline pipe = load_checkpoint(ckpt);
    CpgBundle bundle;
    if (fs::path(source).extension() == ".json")
        bundle = import_cpg_string(read_text(source));
    else
        bundle = minic::parse_source(source, read_text(source));
    auto methods = slice_methods(bundle.graph, bundle.annotations);
    if (methods.empty()) throw SchemaError(source + ": no methods found");

    // buffer everything so a failure never leaves partial output behind
    std::string out_text;
    NoGradGuard ng;
    for (MethodCpg& m : methods) {
        const std::string method_name = m.graph.node(m.method_node).name;
        symbolize(m);
        PreparedGraph pg = prepare_graph(pipe.model, m);
        Tensor x = embed_nodes(pipe.embedder, m);
        ForwardResult fr = forward(pipe.model, pg, x);
        Tensor probs = softmax(fr.logits, 0);
        auto tokens = generate(pipe.decoder, fr.z_g, pipe.decoder.vocab.max_len);
        std::string annotation;
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (i) annotation += " ";
            annotation += tokens[i];
        }
        nlohmann::ordered_json rec;
        rec["method"] = method_name;
        rec["node"] = m.method_node;
        rec["label"] = static_cast<int>(argmax(fr.logits));
        rec["probability"] = probs.at(1);
        rec["annotation"] = annotation;
        out_text += rec.dump() + "\n";
    }
    std::cout << out_text;
    if (!out_path.empty()) write_text(out_path, out_text);
    return kExitOk;
}

int cmd_transfer(const std::string& ckpt, const std::string& manifest, const std::string& out,
                 int epochs) {
    Pipeline pipe = load_checkpoint(ckpt);
    IngestResult data = ingest(manifest);
    for (const std::string& s : data.skipped) std::cerr << "skipped " << s << "\n";
    TrainResult tr = transfer_finetune(pipe, data.samples, epochs);
    save_checkpoint(pipe, out);
    nlohmann::ordered_json report;
    report["epochs"] = tr.epoch_losses.size();
    report["loss_trace"] = tr.epoch_losses;
    std::cout << report.dump(2) << "\n";
    return kExitOk;
}

// Verifies reverse-mode gradients of the full network (layers, readout,
// classifier, decoder, fused loss) against central finite differences on a
// small fixed graph.
int cmd_grad_check(double tol) {
    TypeRegistry reg{TypeRegistry::Empty{}};
    for (const char* t : {"A", "B", "C"}) reg.add_node_type(t);
    for (const char* e : {"P", "Q"}) reg.add_edge_type(e);

    Cpg g(reg);
    for (NodeId id = 1; id <= 5; ++id) {
        CpgNode n;
        n.id = id;
        n.node_type = static_cast<TypeId>((id - 1) % 3);
        g.add_node(n);
    }
    g.add_edge({1, 2, 0, ""});
    g.add_edge({2, 3, 1, ""});
    g.add_edge({3, 4, 0, ""});
    g.add_edge({4, 5, 1, ""});
    g.add_edge({5, 1, 0, ""});
    g.add_edge({2, 4, 1, "x"});
    MethodCpg method;
    method.method_node = 1;
    method.graph = std::move(g);

    ModelConfig mc;
    mc.feature_dim = 8;
    mc.hidden_dim = 8;
    mc.heads = 2;
    mc.layers = 2;
    mc.dropout = 0.0f;
    DshgtModel model = DshgtModel::init(reg, mc, 7);
    AnnotationVocab vocab = AnnotationVocab::build({{"checks", "the", "divisor"}}, 1, 8);
    DecoderParams decoder = DecoderParams::init(vocab, 8, 8);
    PreparedGraph pg = prepare_graph(model, method);

    Rng rng(99);
    Tensor x = Tensor::zeros({5, 8});
    for (float& v : x.values_mut()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const std::vector<std::string> annotation = {"checks", "the", "divisor"};

    std::vector<Tensor> params{x};
    std::vector<std::string> names{"features"};
    for (auto& [name, t] : model.named_parameters()) {
        params.push_back(t);
        names.push_back(name);
    }
    for (auto& [name, t] : decoder.named_parameters()) {
        params.push_back(t);
        names.push_back(name);
    }
    auto f = [&](const std::vector<Tensor>&) {
        ForwardResult fr = forward(model, pg, params[0]);
        Tensor sup = teacher_forced_loss(decoder, fr.z_g, annotation);
        return fused_loss(fr.logits, 1, sup, 0.2f);
    };
    GradCheckReport rep = grad_check(f, params, tol);
    std::printf("gradient check: %s\n", rep.pass ? "PASS" : "FAIL");
    std::printf("  max relative error: %.3e (tolerance %.1e)\n", rep.max_rel_error, rep.tol);
    std::printf("  coordinates checked: %zu, excluded at kinks: %zu\n", rep.checked,
                rep.excluded);
    if (!rep.pass)
        std::printf("  worst: %s[%zu]\n", names[rep.worst_input].c_str(), rep.worst_index);
    return rep.pass ? kExitOk : kExitNumeric;
}

int cmd_synth(const std::string& pattern, int count, std::uint64_t seed,
              const std::string& out_dir) {
    SynthOptions opt;
    opt.pattern = pattern;
    opt.count = count;
    opt.seed = seed;
    SynthCorpus corpus = synthesize(opt);
    std::string manifest = write_corpus(corpus, out_dir);
    std::cerr << "wrote " << corpus.files.size() << " files and " << manifest << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"method-level code property graphs + dual-supervisor heterogeneous "
                 "graph transformer"};
    app.require_subcommand(1);

    // build-cpg
    std::string bc_dir, bc_out = "cpg.json";
    auto* build = app.add_subcommand("build-cpg", "parse a mini-C directory into one CPG");
    build->add_option("dir", bc_dir, "source directory")->required();
    build->add_option("--out", bc_out, "output graph JSON path");

    // slice
    std::string sl_graph, sl_out = "slices";
    auto* slice = app.add_subcommand("slice", "split a CPG into symbolized method slices");
    slice->add_option("graph", sl_graph, "graph JSON path")->required();
    slice->add_option("--out", sl_out, "output directory");

    // train
    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "train on a manifest and write a checkpoint");
    train_cmd->add_option("--manifest", tf.manifest, "JSONL manifest")->required();
    train_cmd->add_option("--config", tf.config_path, "config JSON (flags override it)");
    train_cmd->add_option("--out", tf.out, "checkpoint output path")->required();
    train_cmd->add_option("--metrics", tf.metrics_out, "also write the report JSON here");
    train_cmd->add_option("--lr", tf.lr, "learning rate");
    train_cmd->add_option("--lambda", tf.lambda, "annotation loss weight in [0,1]");
    train_cmd->add_option("--dropout", tf.dropout, "dropout probability");
    train_cmd->add_option("--epochs", tf.epochs, "training epochs");
    train_cmd->add_option("--batch", tf.batch, "batch size");
    train_cmd->add_option("--dim", tf.hidden_dim, "layer width d");
    train_cmd->add_option("--embed-dim", tf.feature_dim, "initial feature width");
    train_cmd->add_option("--layers", tf.layers, "stacked attention layers");
    train_cmd->add_option("--heads", tf.heads, "attention heads");
    train_cmd->add_option("--seed", tf.seed, "master seed");
    train_cmd->add_option("--split-ratio", tf.split_ratio, "train fraction of the manifest");
    train_cmd->add_option("--embed-mode", tf.embed_mode, "hash | pv-dm");
    train_cmd->add_option("--aggregate", tf.aggregate, "sum | mean neighbor aggregation");
    train_cmd->add_option("--classifier", tf.classifier, "single | two-layer");
    train_cmd->add_flag("--homogeneous", tf.homogeneous,
                        "share one parameter set across all types");
    train_cmd->add_flag("--class-weighting", tf.class_weighting,
                        "inverse-frequency loss weighting");

    // eval
    std::string ev_ckpt, ev_manifest, ev_out;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    eval_cmd->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--manifest", ev_manifest, "JSONL manifest")->required();
    eval_cmd->add_option("--out", ev_out, "write metrics JSON here too");

    // predict
    std::string pr_ckpt, pr_source, pr_out;
    auto* predict_cmd =
        app.add_subcommand("predict", "score every method of a source or CPG file");
    predict_cmd->add_option("--ckpt", pr_ckpt, "checkpoint path")->required();
    predict_cmd->add_option("--source", pr_source, "mini-C file or CPG .json")->required();
    predict_cmd->add_option("--out", pr_out, "write JSONL predictions here too");

    // transfer
    std::string trf_ckpt, trf_manifest, trf_out;
    int trf_epochs = 10;
    auto* transfer_cmd =
        app.add_subcommand("transfer", "fine-tune the readout and classifier on a new corpus");
    transfer_cmd->add_option("--ckpt", trf_ckpt, "source checkpoint")->required();
    transfer_cmd->add_option("--manifest", trf_manifest, "JSONL manifest")->required();
    transfer_cmd->add_option("--out", trf_out, "fine-tuned checkpoint path")->required();
    transfer_cmd->add_option("--epochs", trf_epochs, "fine-tuning epochs");

    // grad-check
    double gc_tol = 1e-3;
    auto* grad_cmd = app.add_subcommand("grad-check", "verify gradients against finite differences");
    grad_cmd->add_option("--tol", gc_tol, "relative tolerance");

    // synth
    std::string sy_pattern = "cwe369", sy_out = "synth";
    int sy_count = 20;
    std::uint64_t sy_seed = 1;
    auto* synth_cmd =
        app.add_subcommand("synth", "generate a labeled mini-C corpus with planted flaws");
    synth_cmd->add_option("--pattern", sy_pattern, "cwe369 | cwe834 | cwe676");
    synth_cmd->add_option("--n", sy_count, "sample count");
    synth_cmd->add_option("--seed", sy_seed, "generator seed");
    synth_cmd->add_option("--out", sy_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "E: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (build->parsed()) return cmd_build_cpg(bc_dir, bc_out);
        if (slice->parsed()) return cmd_slice(sl_graph, sl_out);
        if (train_cmd->parsed()) return cmd_train(tf);
        if (eval_cmd->parsed()) return cmd_eval(ev_ckpt, ev_manifest, ev_out);
        if (predict_cmd->parsed()) return cmd_predict(pr_ckpt, pr_source, pr_out);
        if (transfer_cmd->parsed())
            return cmd_transfer(trf_ckpt, trf_manifest, trf_out, trf_epochs);
        if (grad_cmd->parsed()) return cmd_grad_check(gc_tol);
        if (synth_cmd->parsed()) return cmd_synth(sy_pattern, sy_count, sy_seed, sy_out);
    } catch (const ConfigError& e) {
        std::cerr << "E: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "E: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ShapeError& e) {
        std::cerr << "E: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "E: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "E: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
