#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "oracles.hpp"
#include "rlab/numerics.hpp"

using namespace rlab;
using doctest::Approx;

TEST_CASE("cosine_similarity canonical values") {
    CHECK(cosine_similarity(Vec{1, 0}, Vec{0, 1}) == 0.0);
    CHECK(cosine_similarity(Vec{2, 4}, Vec{1, 2}) == Approx(1.0).epsilon(1e-15));
    CHECK(cosine_similarity(Vec{1, 0}, Vec{1, 1}) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("cosine_similarity errors") {
    CHECK_THROWS_AS(cosine_similarity(Vec{1, 0}, Vec{1, 0, 0}), NumericsError);
    CHECK_THROWS_AS(cosine_similarity(Vec{0, 0}, Vec{1, 0}), NumericsError);
    CHECK_THROWS_AS(cosine_similarity_grad(Vec{1, 0}, Vec{0, 0}), NumericsError);
}

TEST_CASE("cosine_similarity is symmetric and scale invariant") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec a = oracle::random_vec(rng, 8);
        const Vec b = oracle::random_vec(rng, 8);
        const double alpha = rng.uniform(0.01, 100.0);
        const double beta = rng.uniform(0.01, 100.0);
        Vec sa = a, sb = b;
        for (double& x : sa) x *= alpha;
        for (double& x : sb) x *= beta;
        const double c = cosine_similarity(a, b);
        CHECK(c == cosine_similarity(b, a));
        CHECK(std::abs(c - cosine_similarity(sa, sb)) < 1e-12);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("cosine_similarity_grad closed forms") {
    const auto g = cosine_similarity_grad(Vec{1, 0}, Vec{0, 1});
    CHECK(g.d_a == Vec{0, 1});
    CHECK(g.d_b == Vec{1, 0});

    const Vec v{0.3, -1.2, 2.5};
    const auto self = cosine_similarity_grad(v, v);
    for (double x : self.d_a) CHECK(std::abs(x) < 1e-15);
}

TEST_CASE("cosine_similarity_grad matches central differences") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec a = oracle::random_vec(rng, 8);
        const Vec b = oracle::random_vec(rng, 8);
        const auto g = cosine_similarity_grad(a, b);
        const Vec fd_a = oracle::finite_difference([&](const Vec& x) { return oracle::naive_cosine(x, b); }, a);
        const Vec fd_b = oracle::finite_difference([&](const Vec& x) { return oracle::naive_cosine(a, x); }, b);
        CHECK(oracle::relative_error(g.d_a, fd_a) < 1e-6);
        CHECK(oracle::relative_error(g.d_b, fd_b) < 1e-6);
    }
}

TEST_CASE("softmax_temperature values") {
    const Vec u = softmax_temperature(Vec{2.5, 2.5, 2.5}, 0.3);
    for (double p : u) CHECK(p == Approx(1.0 / 3.0).epsilon(1e-15));

    const Vec p = softmax_temperature(Vec{1, 0}, 1.0);
    CHECK(p[0] == Approx(0.7310585786300049).epsilon(1e-14));
    CHECK(p[1] == Approx(0.2689414213699951).epsilon(1e-14));

    const Vec big = softmax_temperature(Vec{1000, 999}, 1.0);
    CHECK(std::isfinite(big[0]));
    CHECK(big[0] == Approx(0.7310585786300049).epsilon(1e-14));
    CHECK(big[1] == Approx(0.2689414213699951).epsilon(1e-14));

    CHECK_THROWS_AS(softmax_temperature(Vec{1, 2}, 0.0), NumericsError);
    CHECK_THROWS_AS(softmax_temperature(Vec{1, 2}, -1.0), NumericsError);
}

TEST_CASE("softmax_temperature output is a probability vector") {
    Rng rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        const Vec s = oracle::random_vec(rng, 1 + rng.below(12), 50.0);
        const double tau = rng.uniform(0.01, 5.0);
        const Vec p = softmax_temperature(s, tau);
        double sum = 0.0;
        for (double x : p) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
        // The max entry is exp(0) / z, so it is never underflowed.
        CHECK(*std::max_element(p.begin(), p.end()) > 0.0);
    }
}

TEST_CASE("l2_normalize") {
    const Vec v = l2_normalize(Vec{3, 4});
    CHECK(v[0] == Approx(0.6).epsilon(1e-15));
    CHECK(v[1] == Approx(0.8).epsilon(1e-15));

    const Vec unit{0.6, 0.8};
    const Vec again = l2_normalize(unit);
    CHECK(std::abs(again[0] - 0.6) < 1e-15);
    CHECK(std::abs(again[1] - 0.8) < 1e-15);

    // The 1e-30 floor rejects vectors whose norm is below it.
    CHECK_THROWS_AS(l2_normalize(Vec{1e-200, 0}), NumericsError);
    CHECK_THROWS_AS(l2_normalize(Vec{0, 0}), NumericsError);
    const Vec small = l2_normalize(Vec{1e-20, 0});
    CHECK(small[0] == 1.0);

    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec r = l2_normalize(oracle::random_vec(rng, 16, 1e3));
        CHECK(std::abs(norm(r) - 1.0) < 1e-12);
    }
}

TEST_CASE("Rng is deterministic and unbiased enough") {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        CHECK(x != c.next_u64());
    }
    // First SplitMix64 outputs for seed 0, as published with the algorithm.
    Rng z(0);
    CHECK(z.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(z.next_u64() == 0x6e789e6aa1b965f4ULL);

    Rng r(7);
    std::vector<int> counts(6, 0);
    for (int i = 0; i < 60000; ++i) counts[r.below(6)]++;
    for (int n : counts) CHECK(std::abs(n - 10000) < 500);
    CHECK_THROWS_AS(r.below(0), NumericsError);
}

TEST_CASE("seeded_init determinism, zero scale and golden values") {
    Rng r1(42), r2(42);
    const Mat m1 = seeded_init(r1, 3, 5, 0.5);
    const Mat m2 = seeded_init(r2, 3, 5, 0.5);
    CHECK(m1 == m2);
    for (double x : m1.values) CHECK(std::abs(x) <= 0.5);

    Rng r3(1);
    for (double x : seeded_init(r3, 4, 4, 0.0).values) CHECK(x == 0.0);

    Rng g(42);
    const Mat golden = seeded_init(g, 2, 2, 0.1);
    std::ifstream in(std::string(RLAB_GOLDEN_DIR) + "/seeded_init_42_2x2.txt");
    REQUIRE(in);
    for (double x : golden.values) {
        double expected = 0.0;
        REQUIRE(static_cast<bool>(in >> expected));
        CHECK(x == expected);
    }
}
