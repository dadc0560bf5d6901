#pragma once

#include <string>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rlab/data.hpp"
#include "rlab/encoder.hpp"

namespace rlab {

class MiningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScoredDoc {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

// Scores non-increasing; equal scores ordered by ascending id.
using RankedList = std::vector<ScoredDoc>;

// Ranking order used everywhere: higher score first, then smaller id.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
}

// Exact cosine index over unit-norm vectors. Immutable once built.
class DenseIndex {
public:
    explicit DenseIndex(std::size_t dim) : dim_(dim) {}

    // Throws MiningError on duplicate id, wrong dimension or non-unit vector.
    void add(std::string id, Vec unit_vector);

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    bool contains(const std::string& id) const { return pos_.count(id) != 0; }
    const Vec& vector(const std::string& id) const;
    const std::vector<std::string>& ids() const { return ids_; }

    // k highest-cosine entries (all when k >= size), ranked.
    RankedList search_top_k(std::span<const double> query, std::size_t k) const;

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<Vec> vectors_;
    std::unordered_map<std::string, std::size_t> pos_;
};

DenseIndex build_index(const std::vector<Document>& corpus, const EncoderParams& params,
                       const EncoderConfig& config);

inline constexpr std::size_t kDefaultNegatives = 10;

// Top-(k+1) retrieval for the query with positive_id removed, truncated to k.
std::vector<std::string> mine_ance_negatives(const DenseIndex& index, const EncoderParams& params,
                                             const EncoderConfig& config, std::string_view query,
                                             const std::string& positive_id,
                                             std::size_t k = kDefaultNegatives);

// Uniform sample of k ids without replacement, never positive_id. When fewer
// than k candidates exist, all of them are returned shuffled.
std::vector<std::string> mine_random_negatives(const std::vector<std::string>& corpus_ids,
                                               const std::string& positive_id, std::size_t k,
                                               Rng& rng);

enum class MiningStrategy { ance, random };

std::string to_string(MiningStrategy s);
MiningStrategy parse_mining_strategy(std::string_view name);

struct MiningConfig {
    MiningStrategy strategy = MiningStrategy::ance;
    std::size_t k = kDefaultNegatives;
    std::uint64_t seed = 0;  // random strategy only
};

// One training example per query with a relevant document: the first relevant
// doc (by id) is the positive, negatives come from the chosen strategy. When
// `neg_queries` is non-empty every negative gets its queries attached; a
// negative missing from the map is an error. Queries without a relevant
// document are skipped with a warning on stderr.
std::vector<TrainingExample> mine_training_set(const std::vector<Document>& corpus,
                                               const std::vector<Query>& queries, const Qrels& qrels,
                                               const NegQueryMap& neg_queries,
                                               const EncoderParams& params,
                                               const EncoderConfig& config,
                                               const MiningConfig& mining);

}  // namespace rlab
