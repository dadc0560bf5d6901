#include "rlab/mining.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace rlab {

void DenseIndex::add(std::string id, Vec unit_vector) {
    if (unit_vector.size() != dim_) {
        throw MiningError("index: vector for '" + id + "' has dimension " +
                          std::to_string(unit_vector.size()) + ", expected " + std::to_string(dim_));
    }
    if (std::abs(norm(unit_vector) - 1.0) > 1e-9) {
        throw MiningError("index: vector for '" + id + "' is not unit norm");
    }
    if (!pos_.emplace(id, ids_.size()).second) {
        throw MiningError("index: duplicate doc id '" + id + "'");
    }
    ids_.push_back(std::move(id));
    vectors_.push_back(std::move(unit_vector));
}

const Vec& DenseIndex::vector(const std::string& id) const {
    auto it = pos_.find(id);
    if (it == pos_.end()) {
        throw MiningError("index: unknown doc id '" + id + "'");
    }
    return vectors_[it->second];
}

RankedList DenseIndex::search_top_k(std::span<const double> query, std::size_t k) const {
    if (query.size() != dim_) {
        throw MiningError("search: query dimension " + std::to_string(query.size()) +
                          " does not match index dimension " + std::to_string(dim_));
    }
    RankedList all;
    all.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        all.push_back({ids_[i], cosine_similarity(query, vectors_[i])});
    }
    const std::size_t n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), ranks_before);
    all.resize(n);
    return all;
}

DenseIndex build_index(const std::vector<Document>& corpus, const EncoderParams& params,
                       const EncoderConfig& config) {
    if (corpus.empty()) {
        throw MiningError("build_index: empty corpus");
    }
    DenseIndex index(config.d_model);
    for (const auto& doc : corpus) {
        if (doc.text.empty()) {
            throw MiningError("build_index: document '" + doc.id + "' has empty text");
        }
        if (index.contains(doc.id)) {
            throw MiningError("build_index: duplicate doc id '" + doc.id + "'");
        }
        Vec v;
        try {
            v = encode(params, config, doc.text);
        } catch (const EncoderError& e) {
            throw MiningError("build_index: document '" + doc.id + "': " + e.what());
        }
        index.add(doc.id, std::move(v));
    }
    return index;
}

std::vector<std::string> mine_ance_negatives(const DenseIndex& index, const EncoderParams& params,
                                             const EncoderConfig& config, std::string_view query,
                                             const std::string& positive_id, std::size_t k) {
    if (!index.contains(positive_id)) {
        throw MiningError("mine: positive '" + positive_id + "' is not in the corpus");
    }
    const Vec q = encode(params, config, query);
    std::vector<std::string> out;
    for (auto& hit : index.search_top_k(q, k + 1)) {
        if (hit.id != positive_id && out.size() < k) {
            out.push_back(std::move(hit.id));
        }
    }
    return out;
}

std::vector<std::string> mine_random_negatives(const std::vector<std::string>& corpus_ids,
                                               const std::string& positive_id, std::size_t k,
                                               Rng& rng) {
    std::vector<std::string> pool;
    pool.reserve(corpus_ids.size());
    for (const auto& id : corpus_ids) {
        if (id != positive_id) pool.push_back(id);
    }
    if (pool.size() <= k) {
        rng.shuffle(pool);
        return pool;
    }
    // Partial Fisher-Yates: the first k slots are a uniform k-subset in uniform order.
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

std::string to_string(MiningStrategy s) {
    return s == MiningStrategy::ance ? "ance" : "random";
}

MiningStrategy parse_mining_strategy(std::string_view name) {
    if (name == "ance") return MiningStrategy::ance;
    if (name == "random") return MiningStrategy::random;
    throw MiningError("unknown mining strategy '" + std::string(name) + "' (expected ance or random)");
}

std::vector<TrainingExample> mine_training_set(const std::vector<Document>& corpus,
                                               const std::vector<Query>& queries, const Qrels& qrels,
                                               const NegQueryMap& neg_queries,
                                               const EncoderParams& params,
                                               const EncoderConfig& config,
                                               const MiningConfig& mining) {
    std::unordered_map<std::string, const Document*> by_id;
    std::vector<std::string> ids;
    for (const auto& d : corpus) {
        by_id.emplace(d.id, &d);
        ids.push_back(d.id);
    }
    std::optional<DenseIndex> index;
    if (mining.strategy == MiningStrategy::ance) {
        index.emplace(build_index(corpus, params, config));
    }
    Rng rng(mining.seed);

    std::vector<TrainingExample> out;
    for (const auto& q : queries) {
        const auto positive = qrels.first_relevant(q.id);
        if (!positive) {
            std::cerr << "warning: query '" << q.id << "' has no relevant document; skipped\n";
            continue;
        }
        if (!by_id.count(*positive)) {
            throw MiningError("query '" + q.id + "': positive document '" + *positive +
                              "' is not in the corpus");
        }
        const auto negs = mining.strategy == MiningStrategy::ance
                              ? mine_ance_negatives(*index, params, config, q.text, *positive, mining.k)
                              : mine_random_negatives(ids, *positive, mining.k, rng);
        TrainingExample ex;
        ex.query = q.text;
        ex.pos = {by_id.at(*positive)->text};
        for (const auto& id : negs) ex.neg.push_back(by_id.at(id)->text);
        if (!neg_queries.empty()) {
            auto& nq = ex.neg_queries.emplace();
            for (const auto& id : negs) {
                auto it = neg_queries.find(id);
                if (it == neg_queries.end()) {
                    throw MiningError("negative '" + id + "' has no entry in the negative-query map");
                }
                nq.push_back(it->second);
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace rlab
