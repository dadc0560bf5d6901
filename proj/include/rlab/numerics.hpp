#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlab {

// Dense f64 vector. Every producer in this library guarantees finite entries.
using Vec = std::vector<double>;

class NumericsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Row-major f64 matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

    bool operator==(const Mat&) const = default;
};

// SplitMix64 (Steele, Lea, Flood 2014). Integer-only state transitions, so
// the stream is identical on every platform and compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform();
    // Uniform in [lo, hi].
    double uniform(double lo, double hi);
    // Unbiased uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        // Fisher-Yates; std::shuffle is implementation-defined.
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Independent child stream; used to give each consumer its own Rng.
    Rng fork();

private:
    std::uint64_t state_;
};

// Below this norm l2_normalize (and cosine_similarity) refuse the input.
inline constexpr double kNormFloor = 1e-30;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct CosineGrad {
    Vec d_a;
    Vec d_b;
};

// Analytic partials of cosine_similarity w.r.t. each argument.
CosineGrad cosine_similarity_grad(std::span<const double> a, std::span<const double> b);

// exp(s_i / tau) / sum_j exp(s_j / tau), evaluated after subtracting max(s).
Vec softmax_temperature(std::span<const double> scores, double tau);

Vec l2_normalize(std::span<const double> v);

// Entries uniform in [-scale, +scale], drawn row-major from rng.
Mat seeded_init(Rng& rng, std::size_t rows, std::size_t cols, double scale);

bool all_finite(std::span<const double> v);

// out += alpha * v
void axpy(double alpha, std::span<const double> v, std::span<double> out);

}  // namespace rlab
