#include "rlab/data.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "rlab/tokenizer.hpp"

namespace rlab {

using ojson = nlohmann::ordered_json;

void Qrels::add(const std::string& query_id, const std::string& doc_id, int relevance) {
    if (relevance != 0 && relevance != 1) {
        throw DataError("qrels: relevance must be 0 or 1");
    }
    judgments[query_id][doc_id] = relevance;
}

std::set<std::string> Qrels::relevant(const std::string& query_id) const {
    std::set<std::string> out;
    auto it = judgments.find(query_id);
    if (it == judgments.end()) {
        return out;
    }
    for (const auto& [doc, rel] : it->second) {
        if (rel > 0) out.insert(doc);
    }
    return out;
}

std::optional<std::string> Qrels::first_relevant(const std::string& query_id) const {
    auto rel = relevant(query_id);
    if (rel.empty()) return std::nullopt;
    return *rel.begin();
}

void TrainingExample::validate() const {
    if (pos.empty()) {
        throw DataError("training example: 'pos' must hold at least one text");
    }
    if (neg_queries) {
        if (neg_queries->size() != neg.size()) {
            throw DataError("training example: neg_queries has " +
                            std::to_string(neg_queries->size()) + " entries but neg has " +
                            std::to_string(neg.size()));
        }
        for (const auto& qs : *neg_queries) {
            if (qs.empty()) {
                throw DataError("training example: every neg_queries entry needs >= 1 query");
            }
        }
    }
}

namespace {

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

// Calls fn(json, line_number) for every non-blank line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where(path, line_no) + "malformed JSON: " + e.what());
        }
        try {
            fn(j, line_no);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where(path, line_no) + "bad record: " + e.what());
        }
    }
}

std::vector<Document> load_id_text(const std::filesystem::path& path) {
    std::vector<Document> out;
    std::unordered_set<std::string> seen;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        Document d{j.at("id").get<std::string>(), j.at("text").get<std::string>()};
        if (d.id.empty()) {
            throw DataError(where(path, line) + "empty id");
        }
        if (d.text.empty()) {
            throw DataError(where(path, line) + "empty text for id '" + d.id + "'");
        }
        if (!seen.insert(d.id).second) {
            throw DataError(where(path, line) + "duplicate id '" + d.id + "'");
        }
        out.push_back(std::move(d));
    });
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    return out;
}

}  // namespace

std::vector<Document> load_corpus(const std::filesystem::path& path) {
    return load_id_text(path);
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
    return load_id_text(path);
}

void save_records(const std::filesystem::path& path, const std::vector<Document>& records) {
    auto out = open_out(path);
    for (const auto& r : records) {
        out << ojson{{"id", r.id}, {"text", r.text}}.dump() << '\n';
    }
}

Qrels load_qrels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    Qrels q;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(f);
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
            throw DataError(where(path, line_no) + "expected query_id<TAB>doc_id<TAB>relevance");
        }
        if (fields[2] != "0" && fields[2] != "1") {
            throw DataError(where(path, line_no) + "relevance must be 0 or 1, got '" + fields[2] + "'");
        }
        q.add(fields[0], fields[1], fields[2] == "1" ? 1 : 0);
    }
    return q;
}

void save_qrels(const std::filesystem::path& path, const Qrels& qrels) {
    auto out = open_out(path);
    for (const auto& [qid, docs] : qrels.judgments) {
        for (const auto& [did, rel] : docs) {
            out << qid << '\t' << did << '\t' << rel << '\n';
        }
    }
}

void validate_qrels(const Qrels& qrels, const std::vector<Query>& queries,
                    const std::vector<Document>& corpus) {
    std::unordered_set<std::string> qids, dids;
    for (const auto& q : queries) qids.insert(q.id);
    for (const auto& d : corpus) dids.insert(d.id);
    for (const auto& [qid, docs] : qrels.judgments) {
        if (!qids.count(qid)) {
            throw DataError("qrels reference unknown query '" + qid + "'");
        }
        for (const auto& [did, rel] : docs) {
            if (!dids.count(did)) {
                throw DataError("qrels reference unknown document '" + did + "' (query '" + qid + "')");
            }
        }
    }
}

std::vector<TrainingExample> load_train_set(const std::filesystem::path& path) {
    std::vector<TrainingExample> out;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        TrainingExample ex;
        ex.query = j.at("query").get<std::string>();
        ex.pos = j.at("pos").get<std::vector<std::string>>();
        ex.neg = j.value("neg", std::vector<std::string>{});
        if (j.contains("neg_queries") && !j.at("neg_queries").is_null()) {
            ex.neg_queries = j.at("neg_queries").get<std::vector<std::vector<std::string>>>();
        }
        try {
            ex.validate();
        } catch (const DataError& e) {
            throw DataError(where(path, line) + e.what());
        }
        out.push_back(std::move(ex));
    });
    return out;
}

void save_train_set(const std::filesystem::path& path, const std::vector<TrainingExample>& set) {
    auto out = open_out(path);
    for (const auto& ex : set) {
        ex.validate();
        ojson j{{"query", ex.query}, {"pos", ex.pos}, {"neg", ex.neg}};
        if (ex.neg_queries) {
            j["neg_queries"] = *ex.neg_queries;
        }
        out << j.dump() << '\n';
    }
}

NegQueryMap load_neg_query_map(const std::filesystem::path& path) {
    NegQueryMap map;
    for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        auto id = j.at("id").get<std::string>();
        auto qs = j.at("queries").get<std::vector<std::string>>();
        if (qs.empty()) {
            throw DataError(where(path, line) + "document '" + id + "' has no queries");
        }
        if (!map.emplace(id, std::move(qs)).second) {
            throw DataError(where(path, line) + "duplicate id '" + id + "'");
        }
    });
    return map;
}

void save_neg_query_map(const std::filesystem::path& path, const NegQueryMap& map) {
    auto out = open_out(path);
    for (const auto& [id, qs] : map) {
        out << ojson{{"id", id}, {"queries", qs}}.dump() << '\n';
    }
}

std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return s;
}

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return hex64(fnv1a64(buf.str()));
}

}  // namespace rlab
