#include "rlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace rlab {

double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant, std::size_t k) {
    if (k == 0) {
        throw EvalError("ndcg_at_k: k must be >= 1");
    }
    if (relevant.empty()) {
        throw EvalError("ndcg_at_k: no relevant documents");
    }
    double dcg = 0.0;
    const std::size_t depth = std::min(k, ranking.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (relevant.count(ranking[i].id)) {
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, relevant.size());
    for (std::size_t i = 0; i < ideal; ++i) {
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg / idcg;
}

RetrievalRun run_retrieval(const EncoderParams& params, const EncoderConfig& config,
                           const std::vector<Document>& corpus, const std::vector<Query>& queries,
                           std::size_t depth) {
    const DenseIndex index = build_index(corpus, params, config);
    RetrievalRun run;
    for (const auto& q : queries) {
        run[q.id] = index.search_top_k(encode(params, config, q.text), depth);
    }
    return run;
}

EvalReport score_run(const RetrievalRun& run, const std::vector<Query>& queries, const Qrels& qrels,
                     std::size_t k) {
    EvalReport report;
    report.k = k;
    for (const auto& q : queries) {
        const auto relevant = qrels.relevant(q.id);
        if (relevant.empty()) {
            std::cerr << "warning: query '" << q.id << "' has no relevant documents; skipped\n";
            report.skipped.push_back(q.id);
            continue;
        }
        auto it = run.find(q.id);
        if (it == run.end()) {
            throw EvalError("run has no ranking for query '" + q.id + "'");
        }
        report.per_query[q.id] = ndcg_at_k(it->second, relevant, k);
    }
    if (report.per_query.empty()) {
        throw EvalError("no query has a relevant document; nDCG is undefined");
    }
    // Sum in query-id order so the mean does not depend on input order.
    double sum = 0.0;
    for (const auto& [id, v] : report.per_query) sum += v;
    report.mean = sum / static_cast<double>(report.per_query.size());
    return report;
}

Evaluation evaluate(const EncoderParams& params, const EncoderConfig& config,
                    const std::vector<Document>& corpus, const std::vector<Query>& queries,
                    const Qrels& qrels, std::size_t k, std::size_t depth) {
    Evaluation ev;
    ev.run = run_retrieval(params, config, corpus, queries, std::max(k, depth));
    ev.report = score_run(ev.run, queries, qrels, k);
    return ev;
}

void save_run(const std::filesystem::path& path, const RetrievalRun& run) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw EvalError("cannot open " + path.string() + " for writing");
    }
    char buf[64];
    for (const auto& [qid, list] : run) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", list[i].score);
            out << qid << '\t' << (i + 1) << '\t' << list[i].id << '\t' << buf << '\n';
        }
    }
}

RetrievalRun load_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw EvalError("cannot open " + path.string());
    }
    RetrievalRun run;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string qid, rank, did, score;
        if (!std::getline(ss, qid, '\t') || !std::getline(ss, rank, '\t') ||
            !std::getline(ss, did, '\t') || !std::getline(ss, score)) {
            throw EvalError(path.string() + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
        }
        auto& list = run[qid];
        std::size_t rank_value = 0;
        double score_value = 0.0;
        try {
            rank_value = std::stoul(rank);
            score_value = std::stod(score);
        } catch (const std::exception&) {
            throw EvalError(path.string() + ":" + std::to_string(line_no) + ": bad rank or score");
        }
        if (rank_value != list.size() + 1) {
            throw EvalError(path.string() + ":" + std::to_string(line_no) + ": ranks must be contiguous from 1");
        }
        list.push_back({did, score_value});
    }
    return run;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json per_query = nlohmann::ordered_json::object();
    for (const auto& [id, v] : r.per_query) per_query[id] = v;
    return {{"method", r.method},     {"dataset", r.dataset},   {"metric", "ndcg"},
            {"k", r.k},               {"mean", r.mean},         {"num_queries", r.per_query.size()},
            {"skipped", r.skipped},   {"per_query", per_query}};
}

EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.k = j.at("k").get<std::size_t>();
    r.mean = j.at("mean").get<double>();
    if (j.contains("per_query")) {
        for (const auto& [id, v] : j.at("per_query").items()) r.per_query[id] = v.get<double>();
    }
    if (j.contains("skipped")) r.skipped = j.at("skipped").get<std::vector<std::string>>();
    return r;
}

ComparisonTable compare_methods(const std::vector<EvalReport>& reports) {
    if (reports.empty()) {
        throw EvalError("compare: no reports given");
    }
    ComparisonTable t;
    std::map<std::string, std::map<std::string, double>> cells;
    for (const auto& r : reports) {
        if (r.k != reports.front().k) {
            throw EvalError("compare: reports mix nDCG@" + std::to_string(reports.front().k) +
                            " and nDCG@" + std::to_string(r.k));
        }
        if (!cells.count(r.method)) t.methods.push_back(r.method);
        if (std::find(t.datasets.begin(), t.datasets.end(), r.dataset) == t.datasets.end()) {
            t.datasets.push_back(r.dataset);
        }
        if (!cells[r.method].emplace(r.dataset, r.mean).second) {
            throw EvalError("compare: duplicate report for method '" + r.method + "' on dataset '" +
                            r.dataset + "'");
        }
    }
    for (const auto& m : t.methods) {
        if (cells[m].size() != t.datasets.size()) {
            throw EvalError("compare: method '" + m + "' does not cover the same datasets as the others");
        }
        auto& row = t.values.emplace_back();
        double sum = 0.0;
        for (const auto& d : t.datasets) {
            row.push_back(cells[m].at(d));
            sum += row.back();
        }
        t.averages.push_back(sum / static_cast<double>(t.datasets.size()));
    }

    const std::size_t cols = t.datasets.size() + 1;
    auto value = [&](std::size_t m, std::size_t c) {
        return c < t.datasets.size() ? t.values[m][c] : t.averages[m];
    };
    std::vector<double> col_max(cols, -1.0);
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
        for (std::size_t c = 0; c < cols; ++c) col_max[c] = std::max(col_max[c], value(m, c));
    }

    std::ostringstream md, tsv;
    char buf[64];
    md << "| method/dataset (nDCG@" << reports.front().k << ")";
    tsv << "method";
    for (const auto& d : t.datasets) {
        md << " | " << d;
        tsv << '\t' << d;
    }
    md << " | average |\n|---";
    tsv << "\taverage\n";
    for (std::size_t c = 0; c < cols; ++c) md << "|---:";
    md << "|\n";
    for (std::size_t m = 0; m < t.methods.size(); ++m) {
        md << "| " << t.methods[m];
        tsv << t.methods[m];
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = value(m, c);
            std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
            md << " | " << (v == col_max[c] ? "**" + std::string(buf) + "**" : std::string(buf));
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            tsv << '\t' << buf;
        }
        md << " |\n";
        tsv << '\n';
    }
    t.markdown = md.str();
    t.tsv = tsv.str();
    return t;
}

}  // namespace rlab
