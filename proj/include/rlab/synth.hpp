#pragma once

#include <cstdint>

#include "rlab/data.hpp"

namespace rlab {

// Topic-cluster benchmark. Each cluster owns a disjoint vocabulary; a document
// is `doc_length` distinct words of its cluster, a query is `query_length`
// words sampled from one target document (its single relevant doc). Every
// word is independently swapped for a shared noise word with probability
// `noise_rate`.
struct SynthSpec {
    std::size_t num_clusters = 10;
    std::size_t docs_per_cluster = 50;
    std::size_t queries_per_cluster = 10;
    std::size_t vocab_per_cluster = 40;
    double noise_rate = 0.1;
    std::size_t doc_length = 12;
    std::size_t query_length = 4;
    // Generated "positive queries" per document (used as Q* for negatives).
    std::size_t queries_per_doc = 1;
    // Separate training queries over the same corpus; 0 disables the split.
    std::size_t train_queries_per_cluster = 0;

    void validate() const;
};

struct SynthData {
    std::vector<Document> corpus;
    std::vector<Query> queries;
    Qrels qrels;
    std::vector<Query> train_queries;
    Qrels train_qrels;
    NegQueryMap neg_query_map;
    // Cluster of every document, keyed like corpus order.
    std::vector<std::size_t> doc_cluster;
};

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace rlab
