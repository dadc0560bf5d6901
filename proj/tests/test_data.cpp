#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "oracles.hpp"
#include "rlab/data.hpp"
#include "rlab/synth.hpp"
#include "rlab/tokenizer.hpp"

using namespace rlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "rlab_test_data";
    fs::create_directories(dir);
    return dir / name;
}

fs::path write_file(const std::string& name, const std::string& body) {
    const auto path = scratch(name);
    std::ofstream(path, std::ios::binary) << body;
    return path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("load_corpus") {
    CHECK(load_corpus(write_file("empty.jsonl", "")).empty());

    const auto docs = load_corpus(write_file("three.jsonl",
        "{\"id\": \"b\", \"text\": \"second\"}\n"
        "{\"id\": \"a\", \"text\": \"first \\u00e9\"}\n"
        "\n"
        "{\"id\": \"c\", \"text\": \"third\"}\n"));
    REQUIRE(docs.size() == 3);
    CHECK(docs[0] == Document{"b", "second"});
    CHECK(docs[1].text == "first \xC3\xA9");
    CHECK(docs[2].id == "c");

    std::string dup;
    for (int i = 1; i <= 6; ++i) dup += "{\"id\": \"d" + std::to_string(i) + "\", \"text\": \"t\"}\n";
    dup += "{\"id\": \"d2\", \"text\": \"again\"}\n";
    CHECK_THROWS_WITH_AS(load_corpus(write_file("dup.jsonl", dup)), doctest::Contains(":7: duplicate id"), DataError);

    CHECK_THROWS_WITH_AS(load_queries(write_file("bad.jsonl", "{\"id\": \"q\", \"text\": \"ok\"}\n{nope\n")),
                         doctest::Contains(":2: malformed JSON"), DataError);
    CHECK_THROWS_WITH_AS(load_queries(write_file("noid.jsonl", "{\"text\": \"ok\"}\n")),
                         doctest::Contains(":1: bad record"), DataError);
    CHECK_THROWS_WITH_AS(load_corpus(write_file("notext.jsonl", "{\"id\": \"x\", \"text\": \"\"}\n")),
                         doctest::Contains("empty text"), DataError);
    CHECK_THROWS_AS(load_corpus(scratch("does-not-exist.jsonl")), DataError);
}

TEST_CASE("qrels") {
    const auto q = load_qrels(write_file("qrels.tsv", "q1\td1\t1\nq1\td2\t0\nq2\td3\t1\n"));
    CHECK(q.relevant("q1") == std::set<std::string>{"d1"});
    CHECK(q.relevant("q2") == std::set<std::string>{"d3"});
    CHECK(q.relevant("q3").empty());
    CHECK(q.first_relevant("q2") == "d3");

    save_qrels(scratch("qrels2.tsv"), q);
    CHECK(load_qrels(scratch("qrels2.tsv")) == q);

    CHECK_THROWS_WITH_AS(load_qrels(write_file("q_bad.tsv", "q1\td1\t1\nq1 d1 1\n")), doctest::Contains(":2:"), DataError);
    CHECK_THROWS_WITH_AS(load_qrels(write_file("q_grade.tsv", "q1\td1\t2\n")), doctest::Contains("0 or 1"), DataError);

    const std::vector<Query> queries{{"q1", "x"}, {"q2", "y"}};
    const std::vector<Document> corpus{{"d1", "a"}, {"d2", "b"}, {"d3", "c"}};
    CHECK_NOTHROW(validate_qrels(q, queries, corpus));
    CHECK_THROWS_WITH_AS(validate_qrels(q, queries, {{"d1", "a"}}), doctest::Contains("unknown document"), DataError);
    CHECK_THROWS_WITH_AS(validate_qrels(q, {{"q1", "x"}}, corpus), doctest::Contains("unknown query"), DataError);
}

TEST_CASE("training set format") {
    const std::string body =
        "{\"query\":\"q one\",\"pos\":[\"p one\"],\"neg\":[\"n1\",\"n2\"],\"neg_queries\":[[\"a\"],[\"b\",\"c\"]]}\n"
        "{\"query\":\"q two\",\"pos\":[\"p two\",\"p extra\"],\"neg\":[\"n3\"]}\n";
    const auto path = write_file("train.jsonl", body);
    const auto set = load_train_set(path);
    REQUIRE(set.size() == 2);
    CHECK(set[0].neg_queries.has_value());
    CHECK((*set[0].neg_queries)[1] == std::vector<std::string>{"b", "c"});
    CHECK_FALSE(set[1].neg_queries.has_value());
    CHECK(set[1].pos.size() == 2);

    // Files written by save_train_set reload to the same examples and bytes.
    save_train_set(scratch("train2.jsonl"), set);
    CHECK(load_train_set(scratch("train2.jsonl")) == set);
    CHECK(slurp(scratch("train2.jsonl")) == body);

    CHECK_THROWS_WITH_AS(
        load_train_set(write_file("short.jsonl", "{\"query\":\"q\",\"pos\":[\"p\"],\"neg\":[\"a\",\"b\"],\"neg_queries\":[[\"x\"]]}\n")),
        doctest::Contains(":1:"), DataError);
    CHECK_THROWS_AS(load_train_set(write_file("nopos.jsonl", "{\"query\":\"q\",\"pos\":[],\"neg\":[]}\n")), DataError);
    CHECK_THROWS_AS(
        load_train_set(write_file("emptyq.jsonl", "{\"query\":\"q\",\"pos\":[\"p\"],\"neg\":[\"a\"],\"neg_queries\":[[]]}\n")),
        DataError);
}

TEST_CASE("neg query map format") {
    NegQueryMap m{{"d1", {"x y"}}, {"d2", {"a", "b"}}};
    save_neg_query_map(scratch("nq.jsonl"), m);
    CHECK(load_neg_query_map(scratch("nq.jsonl")) == m);
    CHECK_THROWS_AS(load_neg_query_map(write_file("nq_bad.jsonl", "{\"id\":\"d\",\"queries\":[]}\n")), DataError);
}

TEST_CASE("synth_generate structure and determinism") {
    SynthSpec spec;
    spec.train_queries_per_cluster = 5;
    spec.queries_per_doc = 2;
    const SynthData a = synth_generate(spec, 17);
    const SynthData b = synth_generate(spec, 17);
    const SynthData other = synth_generate(spec, 18);

    CHECK(a.corpus == b.corpus);
    CHECK(a.queries == b.queries);
    CHECK(a.qrels == b.qrels);
    CHECK(a.neg_query_map == b.neg_query_map);
    CHECK(a.train_queries == b.train_queries);
    CHECK(a.corpus != other.corpus);

    CHECK(a.corpus.size() == 500);
    CHECK(a.queries.size() == 100);
    CHECK(a.train_queries.size() == 50);
    CHECK(a.neg_query_map.size() == a.corpus.size());
    for (const auto& d : a.corpus) {
        REQUIRE(a.neg_query_map.count(d.id));
        CHECK(a.neg_query_map.at(d.id).size() == 2);
        CHECK(split_words(d.text).size() == spec.doc_length);
    }
    CHECK_NOTHROW(validate_qrels(a.qrels, a.queries, a.corpus));
    CHECK_NOTHROW(validate_qrels(a.train_qrels, a.train_queries, a.corpus));
    for (const auto& q : a.queries) CHECK(a.qrels.relevant(q.id).size() == 1);

    // Each query's relevant doc sits in the query's own cluster.
    std::map<std::string, std::size_t> cluster_of;
    for (std::size_t i = 0; i < a.corpus.size(); ++i) cluster_of[a.corpus[i].id] = a.doc_cluster[i];
    for (std::size_t i = 0; i < a.queries.size(); ++i) {
        CHECK(cluster_of[*a.qrels.first_relevant(a.queries[i].id)] == i / spec.queries_per_cluster);
    }

    // Byte-identical files from identical seeds.
    save_records(scratch("s1.jsonl"), a.corpus);
    save_records(scratch("s2.jsonl"), b.corpus);
    CHECK(slurp(scratch("s1.jsonl")) == slurp(scratch("s2.jsonl")));
}

TEST_CASE("synth_generate bag-of-words oracle separates clusters") {
    SynthSpec spec;
    spec.num_clusters = 10;
    spec.docs_per_cluster = 50;
    spec.queries_per_cluster = 10;
    spec.noise_rate = 0.1;
    const SynthData data = synth_generate(spec, 7);

    // Indicator vectors over the full word vocabulary.
    std::map<std::string, std::size_t> vocab;
    auto bag = [&](const std::string& text) {
        std::map<std::size_t, double> v;
        for (const auto& w : split_words(text)) {
            auto [it, inserted] = vocab.emplace(w, vocab.size());
            v[it->second] = 1.0;
        }
        return v;
    };
    auto cos = [](const std::map<std::size_t, double>& a, const std::map<std::size_t, double>& b) {
        double ab = 0.0;
        for (const auto& [k, x] : a) {
            auto it = b.find(k);
            if (it != b.end()) ab += x * it->second;
        }
        return ab / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };

    std::vector<std::map<std::size_t, double>> doc_bags;
    for (const auto& d : data.corpus) doc_bags.push_back(bag(d.text));
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < data.corpus.size(); ++i) index_of[data.corpus[i].id] = i;

    std::size_t wins = 0;
    for (const auto& q : data.queries) {
        const auto qb = bag(q.text);
        const std::size_t rel = index_of[*data.qrels.first_relevant(q.id)];
        const double rel_score = cos(qb, doc_bags[rel]);
        bool beats_all = true;
        for (std::size_t i = 0; i < data.corpus.size(); ++i) {
            if (data.doc_cluster[i] != data.doc_cluster[rel] && cos(qb, doc_bags[i]) >= rel_score) {
                beats_all = false;
                break;
            }
        }
        wins += beats_all ? 1 : 0;
    }
    const double rate = static_cast<double>(wins) / static_cast<double>(data.queries.size());
    MESSAGE("relevant doc above every out-of-cluster doc for " << rate * 100 << "% of queries");
    CHECK(rate > 0.95);
}

TEST_CASE("synth_generate degenerate and invalid specs") {
    SynthSpec one;
    one.num_clusters = 1;
    one.docs_per_cluster = 5;
    one.queries_per_cluster = 3;
    const SynthData d = synth_generate(one, 1);
    CHECK(d.corpus.size() == 5);
    CHECK(d.queries.size() == 3);

    SynthSpec tiny;
    tiny.vocab_per_cluster = 5;  // below doc_length
    CHECK_THROWS_WITH_AS(synth_generate(tiny, 1), doctest::Contains("too small"), DataError);
    SynthSpec noisy;
    noisy.noise_rate = 1.0;
    CHECK_THROWS_AS(synth_generate(noisy, 1), DataError);
    SynthSpec zero;
    zero.docs_per_cluster = 0;
    CHECK_THROWS_AS(synth_generate(zero, 1), DataError);
    SynthSpec longq;
    longq.query_length = 20;
    CHECK_THROWS_AS(synth_generate(longq, 1), DataError);
}

TEST_CASE("file fingerprint") {
    CHECK(hex64(0) == "0000000000000000");
    CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
    // FNV-1a 64 of the empty input is the offset basis.
    CHECK(file_fingerprint(write_file("fp_empty", "")) == "cbf29ce484222325");
    // Published FNV-1a 64 test vector for "a".
    CHECK(file_fingerprint(write_file("fp_a", "a")) == "af63dc4c8601ec8c");
}
