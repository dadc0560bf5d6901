#include "rlab/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace rlab {

std::uint64_t Rng::next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) {
        throw NumericsError("Rng::below: n must be positive");
    }
    // Reject the top partial bucket so every residue is equally likely.
    const std::uint64_t limit = -n % n;
    for (;;) {
        const std::uint64_t x = next_u64();
        if (x >= limit) {
            return x % n;
        }
    }
}

Rng Rng::fork() {
    return Rng(next_u64());
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw NumericsError("dot: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.empty() || a.size() != b.size()) {
        throw NumericsError(std::string(op) + ": dimension mismatch (" + std::to_string(a.size()) +
                            " vs " + std::to_string(b.size()) + ")");
    }
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b, "cosine_similarity");
    const double na = norm(a);
    const double nb = norm(b);
    if (na < kNormFloor || nb < kNormFloor) {
        throw NumericsError("cosine_similarity: zero-norm input");
    }
    const double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

CosineGrad cosine_similarity_grad(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b, "cosine_similarity_grad");
    const double na = norm(a);
    const double nb = norm(b);
    if (na < kNormFloor || nb < kNormFloor) {
        throw NumericsError("cosine_similarity_grad: zero-norm input");
    }
    const double ab = dot(a, b);
    const double inv = 1.0 / (na * nb);
    // d/da = b/(|a||b|) - (a.b) a/(|a|^3 |b|), symmetric for b.
    const double ca = ab * inv / (na * na);
    const double cb = ab * inv / (nb * nb);
    CosineGrad g{Vec(a.size()), Vec(b.size())};
    for (std::size_t i = 0; i < a.size(); ++i) {
        g.d_a[i] = b[i] * inv - a[i] * ca;
        g.d_b[i] = a[i] * inv - b[i] * cb;
    }
    return g;
}

Vec softmax_temperature(std::span<const double> scores, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw NumericsError("softmax_temperature: tau must be positive and finite");
    }
    if (scores.empty()) {
        throw NumericsError("softmax_temperature: empty score vector");
    }
    if (!all_finite(scores)) {
        throw NumericsError("softmax_temperature: non-finite score");
    }
    const double m = *std::max_element(scores.begin(), scores.end());
    Vec out(scores.size());
    double z = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - m) / tau);
        z += out[i];
    }
    for (double& p : out) {
        p /= z;
    }
    return out;
}

Vec l2_normalize(std::span<const double> v) {
    if (v.empty()) {
        throw NumericsError("l2_normalize: empty vector");
    }
    const double n = norm(v);
    if (!(n >= kNormFloor)) {
        throw NumericsError("l2_normalize: norm below floor 1e-30");
    }
    Vec out(v.begin(), v.end());
    for (double& x : out) {
        x /= n;
    }
    return out;
}

Mat seeded_init(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    if (rows == 0 || cols == 0) {
        throw NumericsError("seeded_init: rows and cols must be positive");
    }
    Mat m(rows, cols);
    for (double& x : m.values) {
        // scale * (2u - 1) keeps scale == 0 exactly zero.
        x = scale * (2.0 * rng.uniform() - 1.0);
    }
    return m;
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void axpy(double alpha, std::span<const double> v, std::span<double> out) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] += alpha * v[i];
    }
}

}  // namespace rlab
