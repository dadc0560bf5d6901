#include "rlab/synth.hpp"

#include <algorithm>
#include <set>

#include "rlab/numerics.hpp"

namespace rlab {

void SynthSpec::validate() const {
    if (num_clusters == 0 || docs_per_cluster == 0 || queries_per_cluster == 0 ||
        vocab_per_cluster == 0 || doc_length == 0 || query_length == 0 || queries_per_doc == 0) {
        throw DataError("synth: all counts must be >= 1");
    }
    if (!(noise_rate >= 0.0 && noise_rate < 1.0)) {
        throw DataError("synth: noise_rate must lie in [0, 1)");
    }
    if (vocab_per_cluster < doc_length) {
        throw DataError("synth: vocab_per_cluster (" + std::to_string(vocab_per_cluster) +
                        ") too small for doc_length (" + std::to_string(doc_length) + ")");
    }
    if (doc_length < query_length) {
        throw DataError("synth: query_length exceeds doc_length");
    }
}

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                   "s", "t", "v", "z", "br", "dr", "kl", "st", "tr", "sh"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};

std::string pseudo_word(Rng& rng) {
    std::string w;
    const auto syllables = 2 + rng.below(2);
    for (std::uint64_t s = 0; s < syllables; ++s) {
        w += kOnsets[rng.below(std::size(kOnsets))];
        w += kVowels[rng.below(std::size(kVowels))];
    }
    return w;
}

std::string make_id(char prefix, std::size_t index, std::size_t count) {
    std::string digits = std::to_string(index);
    const std::size_t width = std::max<std::size_t>(4, std::to_string(count).size());
    return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

// `k` distinct indices in [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
        if (!s.empty()) s += ' ';
        s += w;
    }
    return s;
}

struct Generator {
    const SynthSpec& spec;
    std::vector<std::vector<std::string>> cluster_vocab;
    std::vector<std::string> noise_vocab;

    std::string maybe_noise(Rng& rng, const std::string& word) const {
        if (spec.noise_rate > 0.0 && rng.uniform() < spec.noise_rate) {
            return noise_vocab[rng.below(noise_vocab.size())];
        }
        return word;
    }

    // Query text sampled from a document's clean word list.
    std::string query_from(Rng& rng, const std::vector<std::string>& doc_words) const {
        std::vector<std::string> words;
        for (auto i : sample_without_replacement(rng, doc_words.size(), spec.query_length)) {
            words.push_back(maybe_noise(rng, doc_words[i]));
        }
        return join(words);
    }
};

}  // namespace

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng root(seed);
    Rng vocab_rng = root.fork();
    Rng doc_rng = root.fork();
    Rng query_rng = root.fork();
    Rng negq_rng = root.fork();
    Rng train_rng = root.fork();

    Generator gen{spec, {}, {}};
    std::set<std::string> used;
    auto fresh_word = [&]() {
        for (;;) {
            auto w = pseudo_word(vocab_rng);
            if (used.insert(w).second) return w;
        }
    };
    gen.cluster_vocab.resize(spec.num_clusters);
    for (auto& vocab : gen.cluster_vocab) {
        for (std::size_t i = 0; i < spec.vocab_per_cluster; ++i) vocab.push_back(fresh_word());
    }
    for (std::size_t i = 0; i < spec.vocab_per_cluster; ++i) gen.noise_vocab.push_back(fresh_word());

    SynthData out;
    const std::size_t num_docs = spec.num_clusters * spec.docs_per_cluster;
    std::vector<std::vector<std::string>> clean_words(num_docs);
    for (std::size_t c = 0; c < spec.num_clusters; ++c) {
        for (std::size_t i = 0; i < spec.docs_per_cluster; ++i) {
            const std::size_t d = c * spec.docs_per_cluster + i;
            std::vector<std::string> words;
            for (auto w : sample_without_replacement(doc_rng, spec.vocab_per_cluster, spec.doc_length)) {
                clean_words[d].push_back(gen.cluster_vocab[c][w]);
                words.push_back(gen.maybe_noise(doc_rng, gen.cluster_vocab[c][w]));
            }
            out.corpus.push_back({make_id('d', d, num_docs), join(words)});
            out.doc_cluster.push_back(c);
        }
    }

    auto make_queries = [&](Rng& rng, std::size_t per_cluster, char prefix,
                            std::vector<Query>& queries, Qrels& qrels) {
        const std::size_t total = spec.num_clusters * per_cluster;
        for (std::size_t c = 0; c < spec.num_clusters; ++c) {
            for (std::size_t i = 0; i < per_cluster; ++i) {
                const std::size_t d = c * spec.docs_per_cluster + rng.below(spec.docs_per_cluster);
                Query q{make_id(prefix, c * per_cluster + i, total), gen.query_from(rng, clean_words[d])};
                qrels.add(q.id, out.corpus[d].id, 1);
                queries.push_back(std::move(q));
            }
        }
    };
    make_queries(query_rng, spec.queries_per_cluster, 'q', out.queries, out.qrels);
    if (spec.train_queries_per_cluster > 0) {
        make_queries(train_rng, spec.train_queries_per_cluster, 't', out.train_queries, out.train_qrels);
    }

    for (std::size_t d = 0; d < num_docs; ++d) {
        auto& qs = out.neg_query_map[out.corpus[d].id];
        for (std::size_t k = 0; k < spec.queries_per_doc; ++k) {
            qs.push_back(gen.query_from(negq_rng, clean_words[d]));
        }
    }
    return out;
}

}  // namespace rlab
