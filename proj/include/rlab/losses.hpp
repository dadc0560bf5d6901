#pragma once

#include <optional>
#include <vector>

#include "rlab/numerics.hpp"

namespace rlab {

class LossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LossConfig {
    double tau = 0.05;    // softmax temperature
    double lambda = 0.1;  // penalty weight for CLP

    void validate() const;
};

// One query's embeddings: query, positive, hard negatives and, for CLP, the
// embeddings of each negative's own positive queries (aligned with negatives).
// Vectors need not be unit norm; every score is a cosine.
struct ContrastiveBatch {
    Vec query;
    Vec positive;
    std::vector<Vec> negatives;
    std::optional<std::vector<std::vector<Vec>>> negative_queries;
};

// -log softmax_tau([sim(q, p), sim(q, n_1), ...])[0]
double cl_loss(const ContrastiveBatch& batch, const LossConfig& cfg);

// Mean over negatives j of (1 - mean over m of sim(n_j, q*_jm)). In [0, 2].
double clp_penalty(const ContrastiveBatch& batch);

// (1 - lambda) * cl_loss + lambda * clp_penalty
double clp_loss(const ContrastiveBatch& batch, const LossConfig& cfg);

struct ContrastiveGrad {
    Vec query;
    Vec positive;
    std::vector<Vec> negatives;
    std::vector<std::vector<Vec>> negative_queries;  // empty for cl_loss_grad
};

ContrastiveGrad cl_loss_grad(const ContrastiveBatch& batch, const LossConfig& cfg);
ContrastiveGrad clp_loss_grad(const ContrastiveBatch& batch, const LossConfig& cfg);

}  // namespace rlab
