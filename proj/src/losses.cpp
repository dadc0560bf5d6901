#include "rlab/losses.hpp"

#include <cmath>

namespace rlab {

void LossConfig::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw LossError("loss config: tau must be positive");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw LossError("loss config: lambda must lie in [0, 1]");
    }
}

namespace {

void check_dims(const ContrastiveBatch& b) {
    const std::size_t d = b.query.size();
    auto same = [d](const Vec& v) { return v.size() == d; };
    bool ok = d > 0 && same(b.positive);
    for (const auto& n : b.negatives) ok = ok && same(n);
    if (b.negative_queries) {
        for (const auto& qs : *b.negative_queries) {
            for (const auto& q : qs) ok = ok && same(q);
        }
    }
    if (!ok) {
        throw LossError("contrastive batch: embedding dimension mismatch");
    }
}

void check_negative_queries(const ContrastiveBatch& b) {
    if (!b.negative_queries) {
        throw LossError("CLP requires negative-query embeddings");
    }
    if (b.negative_queries->size() != b.negatives.size()) {
        throw LossError("CLP: negative-query lists must align with negatives");
    }
    for (const auto& qs : *b.negative_queries) {
        if (qs.empty()) {
            throw LossError("CLP: every negative needs at least one query embedding");
        }
    }
}

Vec scores(const ContrastiveBatch& b) {
    Vec s;
    s.reserve(b.negatives.size() + 1);
    s.push_back(cosine_similarity(b.query, b.positive));
    for (const auto& n : b.negatives) {
        s.push_back(cosine_similarity(b.query, n));
    }
    return s;
}

}  // namespace

double cl_loss(const ContrastiveBatch& batch, const LossConfig& cfg) {
    cfg.validate();
    check_dims(batch);
    const Vec p = softmax_temperature(scores(batch), cfg.tau);
    return -std::log(p[0]);
}

double clp_penalty(const ContrastiveBatch& batch) {
    check_dims(batch);
    check_negative_queries(batch);
    if (batch.negatives.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < batch.negatives.size(); ++j) {
        const auto& qs = (*batch.negative_queries)[j];
        double mean_sim = 0.0;
        for (const auto& q : qs) {
            mean_sim += cosine_similarity(batch.negatives[j], q);
        }
        mean_sim /= static_cast<double>(qs.size());
        total += 1.0 - mean_sim;
    }
    return total / static_cast<double>(batch.negatives.size());
}

double clp_loss(const ContrastiveBatch& batch, const LossConfig& cfg) {
    cfg.validate();
    check_negative_queries(batch);
    return (1.0 - cfg.lambda) * cl_loss(batch, cfg) + cfg.lambda * clp_penalty(batch);
}

ContrastiveGrad cl_loss_grad(const ContrastiveBatch& batch, const LossConfig& cfg) {
    cfg.validate();
    check_dims(batch);
    const std::size_t d = batch.query.size();
    const Vec p = softmax_temperature(scores(batch), cfg.tau);

    ContrastiveGrad g;
    g.query.assign(d, 0.0);
    g.positive.assign(d, 0.0);
    g.negatives.assign(batch.negatives.size(), Vec(d, 0.0));

    // dL/ds_j = (p_j - [j == 0]) / tau
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double coef = (p[j] - (j == 0 ? 1.0 : 0.0)) / cfg.tau;
        const Vec& other = j == 0 ? batch.positive : batch.negatives[j - 1];
        const CosineGrad cg = cosine_similarity_grad(batch.query, other);
        axpy(coef, cg.d_a, g.query);
        axpy(coef, cg.d_b, j == 0 ? g.positive : g.negatives[j - 1]);
    }
    return g;
}

ContrastiveGrad clp_loss_grad(const ContrastiveBatch& batch, const LossConfig& cfg) {
    cfg.validate();
    check_dims(batch);
    check_negative_queries(batch);
    const std::size_t d = batch.query.size();

    ContrastiveGrad g = cl_loss_grad(batch, cfg);
    const double w = 1.0 - cfg.lambda;
    for (double& x : g.query) x *= w;
    for (double& x : g.positive) x *= w;
    for (auto& n : g.negatives) {
        for (double& x : n) x *= w;
    }

    g.negative_queries.resize(batch.negatives.size());
    for (std::size_t j = 0; j < batch.negatives.size(); ++j) {
        g.negative_queries[j].assign((*batch.negative_queries)[j].size(), Vec(d, 0.0));
    }
    // A zero weight leaves the CL gradients untouched bit for bit.
    if (cfg.lambda == 0.0) {
        return g;
    }

    const double per_neg = cfg.lambda / static_cast<double>(batch.negatives.size());
    for (std::size_t j = 0; j < batch.negatives.size(); ++j) {
        const auto& qs = (*batch.negative_queries)[j];
        const double coef = -per_neg / static_cast<double>(qs.size());
        for (std::size_t m = 0; m < qs.size(); ++m) {
            const CosineGrad cg = cosine_similarity_grad(batch.negatives[j], qs[m]);
            axpy(coef, cg.d_a, g.negatives[j]);
            axpy(coef, cg.d_b, g.negative_queries[j][m]);
        }
    }
    return g;
}

}  // namespace rlab
