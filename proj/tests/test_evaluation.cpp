#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "rlab/evaluation.hpp"
#include "rlab/synth.hpp"

using namespace rlab;
namespace fs = std::filesystem;

namespace {

RankedList ranking(std::initializer_list<const char*> ids) {
    RankedList out;
    double s = 1.0;
    for (const char* id : ids) {
        out.push_back({id, s});
        s -= 0.1;
    }
    return out;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "rlab_test_eval";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EvalReport report(std::string method, std::string dataset, double mean, std::size_t k = 5) {
    EvalReport r;
    r.method = std::move(method);
    r.dataset = std::move(dataset);
    r.mean = mean;
    r.k = k;
    return r;
}

}  // namespace

TEST_CASE("ndcg_at_k canonical cases") {
    CHECK(ndcg_at_k(ranking({"r", "a", "b", "c", "d"}), {"r"}, 5) == 1.0);
    CHECK(ndcg_at_k(ranking({"a", "b", "c", "d", "e", "r"}), {"r"}, 5) == 0.0);
    CHECK(std::abs(ndcg_at_k(ranking({"a", "b", "r", "c", "d"}), {"r"}, 5) - 0.5) < 1e-15);

    // Two relevant at ranks 1 and 3: (1 + 1/2) / (1 + 1/log2(3)).
    const double expected = 1.5 / (1.0 + 1.0 / std::log2(3.0));
    CHECK(std::abs(ndcg_at_k(ranking({"r1", "a", "r2", "b"}), {"r1", "r2"}, 5) - expected) < 1e-15);
    // More relevant docs than k: ideal is capped at k.
    CHECK(ndcg_at_k(ranking({"r1", "r2"}), {"r1", "r2", "r3"}, 2) == 1.0);
    CHECK(ndcg_at_k({}, {"r"}, 5) == 0.0);

    CHECK_THROWS_AS(ndcg_at_k(ranking({"a"}), {}, 5), EvalError);
    CHECK_THROWS_AS(ndcg_at_k(ranking({"a"}), {"a"}, 0), EvalError);
}

TEST_CASE("ndcg_at_k structural properties") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> ids;
        for (int i = 0; i < 15; ++i) ids.push_back("d" + std::to_string(i));
        rng.shuffle(ids);
        std::set<std::string> rel;
        const std::size_t nrel = 1 + rng.below(4);
        for (std::size_t i = 0; i < nrel; ++i) rel.insert(ids[rng.below(ids.size())]);
        auto make = [](const std::vector<std::string>& order) {
            RankedList out;
            for (std::size_t i = 0; i < order.size(); ++i) out.push_back({order[i], -static_cast<double>(i)});
            return out;
        };
        const std::size_t k = 1 + rng.below(10);
        const double base = ndcg_at_k(make(ids), rel, k);
        CHECK(base >= 0.0);
        CHECK(base <= 1.0);

        // Shuffling below rank k changes nothing.
        auto tail = ids;
        std::vector<std::string> rest(tail.begin() + static_cast<std::ptrdiff_t>(k), tail.end());
        rng.shuffle(rest);
        std::copy(rest.begin(), rest.end(), tail.begin() + static_cast<std::ptrdiff_t>(k));
        CHECK(ndcg_at_k(make(tail), rel, k) == base);

        // Swapping a relevant doc up past a non-relevant neighbour never hurts.
        for (std::size_t i = 1; i < ids.size(); ++i) {
            if (rel.count(ids[i]) && !rel.count(ids[i - 1])) {
                auto up = ids;
                std::swap(up[i], up[i - 1]);
                CHECK(ndcg_at_k(make(up), rel, k) >= base);
                break;
            }
        }
    }
}

TEST_CASE("score_run skips queries without relevant documents") {
    RetrievalRun run;
    run["q1"] = ranking({"d1", "d2"});
    run["q2"] = ranking({"d3", "d4", "d2"});
    run["q3"] = ranking({"d1"});
    Qrels qrels;
    qrels.add("q1", "d1", 1);
    qrels.add("q2", "d2", 1);
    const std::vector<Query> queries{{"q1", "a"}, {"q2", "b"}, {"q3", "c"}};

    const auto rep = score_run(run, queries, qrels, 5);
    CHECK(rep.skipped == std::vector<std::string>{"q3"});
    CHECK(rep.per_query.size() == 2);
    CHECK(rep.per_query.at("q1") == 1.0);
    CHECK(std::abs(rep.per_query.at("q2") - 0.5) < 1e-15);
    CHECK(std::abs(rep.mean - 0.75) < 1e-15);

    Qrels none;
    CHECK_THROWS_AS(score_run(run, queries, none, 5), EvalError);
}

TEST_CASE("verbatim-duplicate corpus reaches nDCG 1") {
    EncoderConfig c;
    c.vocab_size = 1024;
    c.d_model = 16;
    c.d_intermediate = 32;
    const EncoderParams p = init_params(c, 4);
    SynthSpec spec;
    spec.num_clusters = 4;
    spec.docs_per_cluster = 10;
    spec.queries_per_cluster = 1;
    const SynthData data = synth_generate(spec, 9);

    // Each query is the verbatim text of its relevant document.
    std::vector<Query> queries;
    Qrels qrels;
    for (std::size_t i = 0; i < data.corpus.size(); i += 3) {
        const std::string qid = "dup" + std::to_string(i);
        queries.push_back({qid, data.corpus[i].text});
        qrels.add(qid, data.corpus[i].id, 1);
    }
    const auto ev = evaluate(p, c, data.corpus, queries, qrels, 5);
    CHECK(ev.report.mean == 1.0);
    CHECK(ev.report.skipped.empty());
}

TEST_CASE("run dump round trip and independent recompute") {
    EncoderConfig c;
    c.vocab_size = 512;
    c.d_model = 16;
    c.d_intermediate = 32;
    const EncoderParams p = init_params(c, 6);
    SynthSpec spec;
    spec.num_clusters = 5;
    spec.docs_per_cluster = 20;
    spec.queries_per_cluster = 4;
    const SynthData data = synth_generate(spec, 21);

    const auto ev10 = evaluate(p, c, data.corpus, data.queries, data.qrels, 10);
    const auto run_path = scratch("run.tsv");
    const auto qrels_path = scratch("qrels.tsv");
    save_run(run_path, ev10.run);
    save_qrels(qrels_path, data.qrels);

    const RetrievalRun loaded = load_run(run_path);
    CHECK(loaded == ev10.run);

    for (std::size_t k : {5u, 10u}) {
        const auto ours = score_run(loaded, data.queries, data.qrels, k);
        const auto oracle_scores = oracle::ndcg_from_files(run_path.string(), qrels_path.string(), k);
        REQUIRE(oracle_scores.size() == ours.per_query.size());
        double mean = 0.0;
        for (const auto& [qid, v] : oracle_scores) {
            CHECK(std::abs(ours.per_query.at(qid) - v) < 1e-12);
            mean += v;
        }
        mean /= static_cast<double>(oracle_scores.size());
        CHECK(std::abs(ours.mean - mean) < 1e-12);
    }

    // Same run at two cutoffs: every query with its hit in ranks 6..10 can only gain.
    const auto at5 = score_run(ev10.run, data.queries, data.qrels, 5);
    const auto at10 = score_run(ev10.run, data.queries, data.qrels, 10);
    for (const auto& [qid, v] : at5.per_query) CHECK(at10.per_query.at(qid) >= v);

    std::ofstream(scratch("bad_run.tsv")) << "q1\t1\td1\n";
    CHECK_THROWS_AS(load_run(scratch("bad_run.tsv")), EvalError);
}

TEST_CASE("report json round trip") {
    EvalReport r = report("ance-clp", "synth", 0.625, 5);
    r.per_query = {{"q1", 0.5}, {"q2", 0.75}};
    r.skipped = {"q9"};
    const EvalReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
    CHECK(back.method == r.method);
    CHECK(back.dataset == r.dataset);
    CHECK(back.k == r.k);
    CHECK(back.mean == r.mean);
    CHECK(back.per_query == r.per_query);
    CHECK(back.skipped == r.skipped);
}

TEST_CASE("compare_methods") {
    SUBCASE("single method, two datasets") {
        const auto t = compare_methods({report("random", "a", 0.2), report("random", "b", 0.7)});
        CHECK(t.methods == std::vector<std::string>{"random"});
        CHECK(t.datasets == std::vector<std::string>{"a", "b"});
        REQUIRE(t.averages.size() == 1);
        CHECK(std::abs(t.averages[0] - 0.45) < 1e-15);
    }

    SUBCASE("golden markdown and tsv") {
        const auto t = compare_methods({report("ance-cl", "alpha", 0.5), report("ance-clp", "alpha", 0.4),
                                        report("ance-cl", "beta", 0.25), report("ance-clp", "beta", 0.3)});
        CHECK(t.markdown == slurp(fs::path(RLAB_GOLDEN_DIR) / "compare_2x2.md"));
        CHECK(t.tsv == slurp(fs::path(RLAB_GOLDEN_DIR) / "compare_2x2.tsv"));
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(compare_methods({}), EvalError);
        CHECK_THROWS_WITH_AS(compare_methods({report("m", "a", 0.1, 5), report("m", "b", 0.1, 10)}),
                             doctest::Contains("nDCG@10"), EvalError);
        CHECK_THROWS_WITH_AS(compare_methods({report("m", "a", 0.1), report("m", "a", 0.2)}),
                             doctest::Contains("duplicate"), EvalError);
        CHECK_THROWS_WITH_AS(compare_methods({report("m", "a", 0.1), report("n", "a", 0.2), report("m", "b", 0.3)}),
                             doctest::Contains("'n'"), EvalError);
    }
}
