#include "pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "rlab/checkpoint.hpp"
#include "rlab/data.hpp"
#include "rlab/evaluation.hpp"

namespace rlab::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Standard file names inside data_dir, used when a path key is left empty.
const std::map<std::string, std::string> kDataFiles = {
    {"corpus", "corpus.jsonl"},       {"queries", "queries.jsonl"},
    {"qrels", "qrels.tsv"},           {"train_queries", "train_queries.jsonl"},
    {"train_qrels", "train_qrels.tsv"}, {"neg_queries", "neg_queries.jsonl"},
};

std::string flag_of(const std::string& key) {
    std::string flag = key;
    for (char& c : flag) {
        if (c == '_') c = '-';
    }
    return "--" + flag;
}

// Resolved path for a file key, or empty when neither the key nor data_dir gives one.
fs::path path_of(const Config& c, const std::string& key) {
    const std::string explicit_path = c.at(key).get<std::string>();
    if (!explicit_path.empty()) return explicit_path;
    const std::string data_dir = c.at("data_dir").get<std::string>();
    auto it = kDataFiles.find(key);
    if (data_dir.empty() || it == kDataFiles.end()) return {};
    return fs::path(data_dir) / it->second;
}

fs::path require_path(const Config& c, const std::string& key, const std::string& command) {
    fs::path p = path_of(c, key);
    if (p.empty()) {
        throw PipelineError(command + ": no " + key + " file given (set " + flag_of(key) + " or --data-dir)");
    }
    if (!fs::exists(p)) {
        throw PipelineError(command + ": " + key + " file " + p.string() + " does not exist");
    }
    return p;
}

fs::path prepare_outdir(const Config& c) {
    const fs::path out = c.at("outdir").get<std::string>();
    if (out.empty()) throw PipelineError("outdir must not be empty");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) {
        throw PipelineError("cannot create output directory " + out.string() + ": " + ec.message());
    }
    return out;
}

void write_text(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << body)) throw PipelineError("cannot write " + path.string());
}

// Manifest skeleton. The output directory is left out of the recorded config
// so that identical runs into different directories produce identical manifests.
ordered_json manifest_for(const std::string& command, const Config& c) {
    ordered_json m;
    m["command"] = command;
    Config recorded = c;
    recorded.erase("outdir");
    m["config"] = recorded;
    m["seed"] = c.at("seed");
    m["inputs"] = ordered_json::object();
    m["outputs"] = ordered_json::object();
    return m;
}

void record_input(ordered_json& m, const std::string& key, const fs::path& p) {
    m["inputs"][key] = {{"path", p.string()}, {"fnv1a64", file_fingerprint(p)}};
}

void record_output(ordered_json& m, const fs::path& outdir, const std::string& name) {
    m["outputs"][name] = file_fingerprint(outdir / name);
}

ordered_json finish(ordered_json m, const fs::path& outdir, const std::string& command) {
    write_text(outdir / (command + "_manifest.json"), m.dump(2) + "\n");
    return m;
}

// Parameters the command starts from: a checkpoint when given, else a fresh
// seeded model. A dense checkpoint is upcycled when the config asks for MoE.
Checkpoint starting_model(const Config& c, ordered_json& m, const std::string& key) {
    const EncoderConfig wanted = encoder_config(c);
    const std::uint64_t seed = c.at("seed").get<std::uint64_t>();
    const std::string path = c.at(key).get<std::string>();
    if (path.empty()) {
        return {wanted, init_params(wanted, seed)};
    }
    if (!fs::exists(path)) throw PipelineError(key + " file " + path + " does not exist");
    record_input(m, key, path);
    Checkpoint ck = load_checkpoint(path);
    if (wanted.moe && !ck.config.moe) {
        EncoderConfig moe_cfg = ck.config;
        moe_cfg.moe = wanted.moe;
        ck.params = upcycle_to_moe(ck.params, moe_cfg, seed);
        ck.config = moe_cfg;
    }
    return ck;
}

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <typename T>
T get_enum(const Config& c, const std::string& key, T (*parse)(std::string_view)) {
    try {
        return parse(c.at(key).get<std::string>());
    } catch (const std::exception& e) {
        throw PipelineError(std::string("config key ") + key + ": " + e.what());
    }
}

bool compatible(const json& def, const json& v) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_string()) return v.is_string();
    if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (def.is_number_float()) return v.is_number();
    return false;
}

}  // namespace

Config default_config() {
    Config c;
    c["preset"] = "";
    c["seed"] = 0u;
    c["outdir"] = "out";
    c["data_dir"] = "";
    // encoder
    c["vocab_size"] = 4096u;
    c["d_model"] = 64u;
    c["d_intermediate"] = 256u;
    c["moe"] = false;
    c["num_experts"] = 2u;
    // synthetic benchmark
    c["num_clusters"] = 10u;
    c["docs_per_cluster"] = 50u;
    c["queries_per_cluster"] = 10u;
    c["vocab_per_cluster"] = 40u;
    c["noise_rate"] = 0.1;
    c["doc_length"] = 12u;
    c["query_length"] = 4u;
    c["queries_per_doc"] = 1u;
    c["train_queries_per_cluster"] = 20u;
    // files
    c["corpus"] = "";
    c["queries"] = "";
    c["qrels"] = "";
    c["train_queries"] = "";
    c["train_qrels"] = "";
    c["neg_queries"] = "";
    c["train_set"] = "";
    c["init_checkpoint"] = "";
    c["checkpoint"] = "";
    // mining
    c["mining_strategy"] = "ance";
    c["negatives"] = 10u;
    c["refresh"] = false;
    // training
    c["learning_rate"] = 1e-5;
    c["epochs"] = 1u;
    c["grad_accum_steps"] = 4u;
    c["loss"] = "cl";
    c["tau"] = 0.05;
    c["lambda"] = 0.1;
    c["freeze"] = "full";
    c["stop_grad_neg_queries"] = false;
    // evaluation
    c["eval_k"] = 5u;
    c["method"] = "";
    c["dataset"] = "synth";
    return c;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"random-dataset", "ance-dataset", "ance-clp",
                                                   "ance-clp-intermediate", "ance-clp-moe-intermediate"};
    return names;
}

void apply_preset(Config& c, const std::string& name) {
    struct Row {
        const char* mining;
        const char* loss;
        const char* freeze;
        bool moe;
    };
    static const std::map<std::string, Row> rows = {
        {"random-dataset", {"random", "cl", "full", false}},
        {"ance-dataset", {"ance", "cl", "full", false}},
        {"ance-clp", {"ance", "clp", "full", false}},
        {"ance-clp-intermediate", {"ance", "clp", "intermediate_only", false}},
        {"ance-clp-moe-intermediate", {"ance", "clp", "moe_only", true}},
    };
    auto it = rows.find(name);
    if (it == rows.end()) {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw PipelineError("unknown preset '" + name + "' (expected one of: " + known + ")");
    }
    c["preset"] = name;
    c["mining_strategy"] = it->second.mining;
    c["loss"] = it->second.loss;
    c["freeze"] = it->second.freeze;
    c["moe"] = it->second.moe;
}

void merge_config(Config& c, const json& overrides, const std::string& source) {
    if (!overrides.is_object()) throw PipelineError(source + ": config must be a JSON object");
    if (overrides.contains("preset")) {
        const json& p = overrides.at("preset");
        if (!p.is_string()) throw PipelineError(source + ": key 'preset' must be a string");
        if (!p.get<std::string>().empty()) apply_preset(c, p.get<std::string>());
    }
    for (const auto& [key, value] : overrides.items()) {
        if (key == "preset") continue;
        if (!c.contains(key)) throw PipelineError(source + ": unknown config key '" + key + "'");
        if (!compatible(c.at(key), value)) {
            throw PipelineError(source + ": config key '" + key + "' expects a value like " + c.at(key).dump() +
                                ", got " + value.dump());
        }
        c[key] = c.at(key).is_number_float() ? json(value.get<double>()) : value;
    }
}

json parse_flag_value(const Config& c, const std::string& key, const std::string& text) {
    const json& def = c.at(key);
    const std::string where = "flag " + flag_of(key) + ": ";
    try {
        if (def.is_boolean()) {
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw PipelineError(where + "expected true or false, got '" + text + "'");
        }
        if (def.is_number_unsigned()) {
            std::size_t used = 0;
            if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
            const unsigned long long v = std::stoull(text, &used);
            if (used != text.size()) throw std::invalid_argument("trailing characters");
            return v;
        }
        if (def.is_number_float()) {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument("trailing characters");
            return v;
        }
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception&) {
        throw PipelineError(where + "expected a value like " + def.dump() + ", got '" + text + "'");
    }
    return text;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw PipelineError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw PipelineError(path.string() + ": malformed JSON: " + e.what());
    }
}

EncoderConfig encoder_config(const Config& c) {
    EncoderConfig e;
    e.vocab_size = c.at("vocab_size").get<std::size_t>();
    e.d_model = c.at("d_model").get<std::size_t>();
    e.d_intermediate = c.at("d_intermediate").get<std::size_t>();
    if (c.at("moe").get<bool>()) {
        MoEConfig m;
        m.num_experts = c.at("num_experts").get<std::size_t>();
        e.moe = m;
    }
    e.validate();
    return e;
}

SynthSpec synth_spec(const Config& c) {
    SynthSpec s;
    s.num_clusters = c.at("num_clusters").get<std::size_t>();
    s.docs_per_cluster = c.at("docs_per_cluster").get<std::size_t>();
    s.queries_per_cluster = c.at("queries_per_cluster").get<std::size_t>();
    s.vocab_per_cluster = c.at("vocab_per_cluster").get<std::size_t>();
    s.noise_rate = c.at("noise_rate").get<double>();
    s.doc_length = c.at("doc_length").get<std::size_t>();
    s.query_length = c.at("query_length").get<std::size_t>();
    s.queries_per_doc = c.at("queries_per_doc").get<std::size_t>();
    s.train_queries_per_cluster = c.at("train_queries_per_cluster").get<std::size_t>();
    s.validate();
    return s;
}

MiningConfig mining_config(const Config& c) {
    MiningConfig m;
    m.strategy = get_enum(c, "mining_strategy", &parse_mining_strategy);
    m.k = c.at("negatives").get<std::size_t>();
    m.seed = c.at("seed").get<std::uint64_t>();
    if (m.k == 0) throw PipelineError("negatives must be >= 1");
    return m;
}

TrainConfig train_config(const Config& c) {
    TrainConfig t;
    t.learning_rate = c.at("learning_rate").get<double>();
    t.epochs = c.at("epochs").get<std::size_t>();
    t.grad_accum_steps = c.at("grad_accum_steps").get<std::size_t>();
    t.loss = get_enum(c, "loss", &parse_loss_kind);
    t.loss_cfg.tau = c.at("tau").get<double>();
    t.loss_cfg.lambda = c.at("lambda").get<double>();
    t.freeze = get_enum(c, "freeze", &parse_freeze_mode);
    t.seed = c.at("seed").get<std::uint64_t>();
    t.stop_grad_neg_queries = c.at("stop_grad_neg_queries").get<bool>();
    t.validate();
    return t;
}

ordered_json cmd_synth(const Config& c) {
    const SynthSpec spec = synth_spec(c);
    const fs::path out = prepare_outdir(c);
    const SynthData data = synth_generate(spec, c.at("seed").get<std::uint64_t>());

    save_records(out / "corpus.jsonl", data.corpus);
    save_records(out / "queries.jsonl", data.queries);
    save_qrels(out / "qrels.tsv", data.qrels);
    save_records(out / "train_queries.jsonl", data.train_queries);
    save_qrels(out / "train_qrels.tsv", data.train_qrels);
    save_neg_query_map(out / "neg_queries.jsonl", data.neg_query_map);

    ordered_json m = manifest_for("synth", c);
    for (const char* name : {"corpus.jsonl", "queries.jsonl", "qrels.tsv", "train_queries.jsonl", "train_qrels.tsv",
                             "neg_queries.jsonl"}) {
        record_output(m, out, name);
    }
    m["counts"] = {{"documents", data.corpus.size()},
                   {"queries", data.queries.size()},
                   {"train_queries", data.train_queries.size()}};
    return finish(std::move(m), out, "synth");
}

namespace {

struct MiningInputs {
    std::vector<Document> corpus;
    std::vector<Query> queries;
    Qrels qrels;
    NegQueryMap neg_queries;
};

// Training queries and their qrels; falls back to the evaluation files when
// no training split is given.
MiningInputs load_mining_inputs(const Config& c, ordered_json& m, const std::string& command) {
    MiningInputs in;
    const fs::path corpus = require_path(c, "corpus", command);
    record_input(m, "corpus", corpus);
    in.corpus = load_corpus(corpus);

    fs::path queries = path_of(c, "train_queries");
    fs::path qrels = path_of(c, "train_qrels");
    const std::string qkey = queries.empty() || !fs::exists(queries) ? "queries" : "train_queries";
    const std::string rkey = qkey == "queries" ? "qrels" : "train_qrels";
    queries = require_path(c, qkey, command);
    qrels = require_path(c, rkey, command);
    record_input(m, qkey, queries);
    record_input(m, rkey, qrels);
    in.queries = load_queries(queries);
    in.qrels = load_qrels(qrels);

    const fs::path nq = path_of(c, "neg_queries");
    if (!nq.empty() && fs::exists(nq)) {
        record_input(m, "neg_queries", nq);
        in.neg_queries = load_neg_query_map(nq);
    } else if (!c.at("neg_queries").get<std::string>().empty()) {
        throw PipelineError(command + ": neg_queries file " + nq.string() + " does not exist");
    }
    return in;
}

}  // namespace

ordered_json cmd_mine(const Config& c) {
    ordered_json m = manifest_for("mine", c);
    const MiningInputs in = load_mining_inputs(c, m, "mine");
    const MiningConfig mining = mining_config(c);
    const Checkpoint model = starting_model(c, m, "init_checkpoint");
    const fs::path out = prepare_outdir(c);

    const auto set = mine_training_set(in.corpus, in.queries, in.qrels, in.neg_queries, model.params,
                                       model.config, mining);
    if (set.empty()) throw PipelineError("mine: no query has a relevant document; nothing to write");
    save_train_set(out / "train.jsonl", set);
    record_output(m, out, "train.jsonl");
    m["examples"] = set.size();
    return finish(std::move(m), out, "mine");
}

namespace {

// Mean nDCG of the model on the evaluation files, when all of them are present.
std::optional<EvalReport> maybe_evaluate(const Config& c, const Checkpoint& model, ordered_json& m) {
    const fs::path corpus = path_of(c, "corpus");
    const fs::path queries = path_of(c, "queries");
    const fs::path qrels = path_of(c, "qrels");
    for (const auto& p : {corpus, queries, qrels}) {
        if (p.empty() || !fs::exists(p)) return std::nullopt;
    }
    record_input(m, "eval_corpus", corpus);
    record_input(m, "eval_queries", queries);
    record_input(m, "eval_qrels", qrels);
    return evaluate(model.params, model.config, load_corpus(corpus), load_queries(queries), load_qrels(qrels),
                    c.at("eval_k").get<std::size_t>())
        .report;
}

}  // namespace

ordered_json cmd_train(const Config& c) {
    ordered_json m = manifest_for("train", c);
    const TrainConfig tc = train_config(c);
    const fs::path train_set = c.at("train_set").get<std::string>();
    if (train_set.empty()) throw PipelineError("train: no training set given (set --train-set)");
    if (!fs::exists(train_set)) throw PipelineError("train: train_set file " + train_set.string() + " does not exist");
    record_input(m, "train_set", train_set);
    const auto dataset = load_train_set(train_set);
    Checkpoint model = starting_model(c, m, "init_checkpoint");

    EpochRefresh refresh;
    std::optional<MiningInputs> inputs;
    if (c.at("refresh").get<bool>()) {
        inputs = load_mining_inputs(c, m, "train");
        const MiningConfig base = mining_config(c);
        refresh = [&, base](const EncoderParams& params, std::size_t epoch) {
            MiningConfig mc = base;
            mc.seed = base.seed + epoch;
            return mine_training_set(inputs->corpus, inputs->queries, inputs->qrels, inputs->neg_queries, params,
                                     model.config, mc);
        };
    }
    const fs::path out = prepare_outdir(c);
    const TrainResult result = train(model.params, model.config, dataset, tc, refresh);
    model.params = result.params;

    save_checkpoint(out / "checkpoint.bin", model.config, model.params);
    std::string trace = "step,loss\n";
    for (const auto& s : result.trace) trace += std::to_string(s.step) + "," + format_g17(s.loss) + "\n";
    write_text(out / "loss_trace.csv", trace);

    record_output(m, out, "checkpoint.bin");
    record_output(m, out, "loss_trace.csv");
    m["encoder"] = encoder_config_to_json(model.config);
    m["dataset_hash"] = file_fingerprint(train_set);
    m["loss_trace"] = "loss_trace.csv";

    ordered_json metrics;
    metrics["examples"] = dataset.size();
    metrics["optimizer_steps"] = result.optimizer_steps;
    if (!result.trace.empty()) {
        metrics["final_loss"] = result.trace.back().loss;
        const std::size_t last_epoch = result.trace.back().epoch;
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : result.trace) {
            if (s.epoch == last_epoch) {
                sum += s.loss;
                ++n;
            }
        }
        metrics["last_epoch_mean_loss"] = sum / static_cast<double>(n);
    }
    if (auto rep = maybe_evaluate(c, model, m)) {
        metrics["ndcg@" + std::to_string(rep->k)] = rep->mean;
    }
    m["final_metrics"] = metrics;
    return finish(std::move(m), out, "train");
}

ordered_json cmd_eval(const Config& c) {
    ordered_json m = manifest_for("eval", c);
    const fs::path corpus = require_path(c, "corpus", "eval");
    const fs::path queries = require_path(c, "queries", "eval");
    const fs::path qrels_path = require_path(c, "qrels", "eval");
    record_input(m, "corpus", corpus);
    record_input(m, "queries", queries);
    record_input(m, "qrels", qrels_path);
    const Checkpoint model = starting_model(c, m, "checkpoint");
    if (c.at("checkpoint").get<std::string>().empty()) {
        std::cerr << "warning: no --checkpoint given; evaluating the untrained seeded model\n";
    }
    const auto docs = load_corpus(corpus);
    const auto qs = load_queries(queries);
    const Qrels qrels = load_qrels(qrels_path);
    validate_qrels(qrels, qs, docs);
    const fs::path out = prepare_outdir(c);

    Evaluation ev = evaluate(model.params, model.config, docs, qs, qrels, c.at("eval_k").get<std::size_t>());
    std::string method = c.at("method").get<std::string>();
    if (method.empty()) method = c.at("preset").get<std::string>();
    if (method.empty()) method = "custom";
    ev.report.method = method;
    ev.report.dataset = c.at("dataset").get<std::string>();

    save_run(out / "run.tsv", ev.run);
    write_text(out / "report.json", report_to_json(ev.report).dump(2) + "\n");
    write_text(out / "report.md", compare_methods({ev.report}).markdown);
    for (const char* name : {"run.tsv", "report.json", "report.md"}) record_output(m, out, name);
    m["report"] = {{"method", ev.report.method},
                   {"dataset", ev.report.dataset},
                   {"k", ev.report.k},
                   {"mean", ev.report.mean},
                   {"num_queries", ev.report.per_query.size()},
                   {"num_skipped", ev.report.skipped.size()}};
    return finish(std::move(m), out, "eval");
}

ordered_json cmd_compare(const Config& c, const std::vector<fs::path>& inputs) {
    if (inputs.empty()) throw PipelineError("compare: give at least one eval report or eval manifest");
    ordered_json m = manifest_for("compare", c);
    std::vector<EvalReport> reports;
    for (const auto& p : inputs) {
        const json j = load_json_file(p);
        try {
            reports.push_back(report_from_json(j.contains("report") ? j.at("report") : j));
        } catch (const json::exception& e) {
            throw PipelineError(p.string() + ": not an eval report (" + e.what() + ")");
        }
        record_input(m, "input" + std::to_string(reports.size()), p);
    }
    const ComparisonTable table = compare_methods(reports);
    const fs::path out = prepare_outdir(c);
    write_text(out / "comparison.md", table.markdown);
    write_text(out / "comparison.tsv", table.tsv);
    record_output(m, out, "comparison.md");
    record_output(m, out, "comparison.tsv");
    return finish(std::move(m), out, "compare");
}

}  // namespace rlab::pipeline
