#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlab {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Document {
    std::string id;
    std::string text;

    bool operator==(const Document&) const = default;
};

// Queries share the document record shape.
using Query = Document;

// Binary relevance judgments, query_id -> doc_id -> {0, 1}.
struct Qrels {
    std::map<std::string, std::map<std::string, int>> judgments;

    void add(const std::string& query_id, const std::string& doc_id, int relevance);
    // Doc ids judged relevant (1) for the query; empty if none.
    std::set<std::string> relevant(const std::string& query_id) const;
    // First relevant doc id in id order, if any.
    std::optional<std::string> first_relevant(const std::string& query_id) const;

    bool operator==(const Qrels&) const = default;
};

struct TrainingExample {
    std::string query;
    std::vector<std::string> pos;  // first entry is the positive used for training
    std::vector<std::string> neg;
    std::optional<std::vector<std::vector<std::string>>> neg_queries;  // aligned with neg

    // Throws DataError if pos is empty or neg_queries is misaligned.
    void validate() const;

    bool operator==(const TrainingExample&) const = default;
};

// doc_id -> queries for which that document is the positive.
using NegQueryMap = std::map<std::string, std::vector<std::string>>;

// JSONL with {"id", "text"} per line. Blank lines are skipped. Errors cite the
// 1-based line number.
std::vector<Document> load_corpus(const std::filesystem::path& path);
std::vector<Query> load_queries(const std::filesystem::path& path);
void save_records(const std::filesystem::path& path, const std::vector<Document>& records);

// query_id<TAB>doc_id<TAB>relevance, no header.
Qrels load_qrels(const std::filesystem::path& path);
void save_qrels(const std::filesystem::path& path, const Qrels& qrels);

// Every judged query and document must exist.
void validate_qrels(const Qrels& qrels, const std::vector<Query>& queries,
                    const std::vector<Document>& corpus);

// JSONL with {"query", "pos", "neg", "neg_queries"?}.
std::vector<TrainingExample> load_train_set(const std::filesystem::path& path);
void save_train_set(const std::filesystem::path& path, const std::vector<TrainingExample>& set);

// JSONL with {"id": doc_id, "queries": [...]}.
NegQueryMap load_neg_query_map(const std::filesystem::path& path);
void save_neg_query_map(const std::filesystem::path& path, const NegQueryMap& map);

// FNV-1a 64 of the file bytes, as 16 lowercase hex digits.
std::string file_fingerprint(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace rlab
