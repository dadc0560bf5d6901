#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlab/data.hpp"
#include "rlab/encoder.hpp"
#include "rlab/mining.hpp"

namespace rlab {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// query_id -> ranked documents.
using RetrievalRun = std::map<std::string, RankedList>;

struct EvalReport {
    std::string method;
    std::string dataset;
    std::size_t k = 5;
    std::map<std::string, double> per_query;
    double mean = 0.0;
    std::vector<std::string> skipped;  // queries without any relevant document
};

// Binary-gain nDCG@k with log2(rank + 1) discount. Throws EvalError if
// `relevant` is empty or k == 0.
double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant, std::size_t k);

RetrievalRun run_retrieval(const EncoderParams& params, const EncoderConfig& config,
                           const std::vector<Document>& corpus, const std::vector<Query>& queries,
                           std::size_t depth);

// Scores every query of `queries` present in the run. Queries with no
// relevant documents are listed in `skipped` and left out of the mean;
// throws when none remain.
EvalReport score_run(const RetrievalRun& run, const std::vector<Query>& queries, const Qrels& qrels,
                     std::size_t k);

struct Evaluation {
    RetrievalRun run;
    EvalReport report;
};

// Builds the index, retrieves max(k, depth) documents per query and scores nDCG@k.
Evaluation evaluate(const EncoderParams& params, const EncoderConfig& config,
                    const std::vector<Document>& corpus, const std::vector<Query>& queries,
                    const Qrels& qrels, std::size_t k, std::size_t depth = 0);

// query_id<TAB>rank<TAB>doc_id<TAB>score, ranks from 1, scores printed with 17
// significant digits.
void save_run(const std::filesystem::path& path, const RetrievalRun& run);
RetrievalRun load_run(const std::filesystem::path& path);

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

struct ComparisonTable {
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    std::vector<std::vector<double>> values;  // [method][dataset]
    std::vector<double> averages;             // per method
    std::string markdown;
    std::string tsv;
};

// Rows = methods in first-seen order, columns = datasets then their average.
// Every method must cover the same datasets at the same k. Markdown shows
// nDCG x 100 with per-column maxima in bold; TSV keeps raw values.
ComparisonTable compare_methods(const std::vector<EvalReport>& reports);

}  // namespace rlab
