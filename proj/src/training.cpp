#include "rlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rlab {

std::string to_string(LossKind kind) {
    return kind == LossKind::cl ? "cl" : "clp";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "cl") return LossKind::cl;
    if (name == "clp") return LossKind::clp;
    throw TrainingError("unknown loss '" + std::string(name) + "' (expected cl or clp)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw TrainingError("train config: learning_rate must be positive");
    }
    if (grad_accum_steps == 0) {
        throw TrainingError("train config: grad_accum_steps must be >= 1");
    }
    loss_cfg.validate();
}

AdamState AdamState::for_params(const EncoderParams& params) {
    return AdamState{zeros_like(params), zeros_like(params), 0};
}

void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state, double lr) {
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(AdamState::beta1, t);
    const double c2 = 1.0 - std::pow(AdamState::beta2, t);

    std::vector<std::span<const double>> g;
    grads.for_each_tensor([&](const std::string&, TensorKind, std::span<const double> x) { g.push_back(x); });
    std::vector<std::span<double>> m, v;
    state.m.for_each_tensor([&](const std::string&, TensorKind, std::span<double> x) { m.push_back(x); });
    state.v.for_each_tensor([&](const std::string&, TensorKind, std::span<double> x) { v.push_back(x); });

    std::size_t k = 0;
    params.for_each_tensor([&](const std::string& name, TensorKind, std::span<double> p) {
        if (k >= g.size() || g[k].size() != p.size() || m[k].size() != p.size()) {
            throw TrainingError("adam_step: gradient shape mismatch at " + name);
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[k][i];
            m[k][i] = AdamState::beta1 * m[k][i] + (1.0 - AdamState::beta1) * gi;
            v[k][i] = AdamState::beta2 * v[k][i] + (1.0 - AdamState::beta2) * gi * gi;
            const double m_hat = m[k][i] / c1;
            const double v_hat = v[k][i] / c2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::eps);
        }
        ++k;
    });
}

bool is_trainable(TensorKind kind, FreezeMode mode) {
    switch (mode) {
        case FreezeMode::full:
            return true;
        case FreezeMode::intermediate_only:
            return kind == TensorKind::up_weight || kind == TensorKind::up_bias;
        case FreezeMode::moe_only:
            return kind == TensorKind::up_weight || kind == TensorKind::up_bias ||
                   kind == TensorKind::gate;
    }
    return false;
}

void apply_freeze(EncoderParams& grads, FreezeMode mode) {
    if (mode == FreezeMode::moe_only && !grads.gate) {
        throw TrainingError("freeze mode moe_only requires an MoE model");
    }
    grads.for_each_tensor([mode](const std::string&, TensorKind kind, std::span<double> t) {
        if (!is_trainable(kind, mode)) {
            std::fill(t.begin(), t.end(), 0.0);
        }
    });
}

namespace {

// Token ids of every text an example touches, in a fixed order.
struct ExampleTokens {
    std::vector<TokenId> query;
    std::vector<TokenId> positive;
    std::vector<std::vector<TokenId>> negatives;
    std::vector<std::vector<std::vector<TokenId>>> negative_queries;
};

ExampleTokens tokenize_example(const TrainingExample& ex, const EncoderConfig& config, bool with_neg_queries) {
    ExampleTokens t;
    t.query = tokenize(ex.query, config.vocab_size);
    t.positive = tokenize(ex.pos.front(), config.vocab_size);
    for (const auto& n : ex.neg) t.negatives.push_back(tokenize(n, config.vocab_size));
    if (with_neg_queries) {
        for (const auto& qs : *ex.neg_queries) {
            auto& out = t.negative_queries.emplace_back();
            for (const auto& q : qs) out.push_back(tokenize(q, config.vocab_size));
        }
    }
    return t;
}

ContrastiveBatch embed_example(const EncoderParams& params, const EncoderConfig& config,
                               const ExampleTokens& t, bool with_neg_queries) {
    ContrastiveBatch b;
    b.query = encode_tokens(params, config, t.query);
    b.positive = encode_tokens(params, config, t.positive);
    for (const auto& n : t.negatives) b.negatives.push_back(encode_tokens(params, config, n));
    if (with_neg_queries) {
        auto& nq = b.negative_queries.emplace();
        for (const auto& qs : t.negative_queries) {
            auto& out = nq.emplace_back();
            for (const auto& q : qs) out.push_back(encode_tokens(params, config, q));
        }
    }
    return b;
}

bool is_zero(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// Backpropagates a text's upstream gradient; texts with an all-zero upstream
// contribute nothing and are skipped.
void backprop(const EncoderParams& params, const EncoderConfig& config,
              const std::vector<TokenId>& tokens, const Vec& upstream, EncoderParams& grads) {
    if (!is_zero(upstream)) {
        accumulate_encode_grad(params, config, tokens, upstream, grads);
    }
}

void check_dataset(const std::vector<TrainingExample>& dataset, const TrainConfig& cfg) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        try {
            dataset[i].validate();
        } catch (const DataError& e) {
            throw TrainingError("training example " + std::to_string(i) + ": " + e.what());
        }
        if (cfg.loss == LossKind::clp && !dataset[i].neg_queries) {
            throw TrainingError("training example " + std::to_string(i) +
                                ": CLP requires neg_queries on every example");
        }
    }
}

}  // namespace

double example_loss(const EncoderParams& params, const EncoderConfig& config,
                    const TrainingExample& example, const TrainConfig& cfg) {
    const bool clp = cfg.loss == LossKind::clp;
    if (clp && !example.neg_queries) {
        throw TrainingError("CLP requires neg_queries");
    }
    const auto tokens = tokenize_example(example, config, clp);
    const auto batch = embed_example(params, config, tokens, clp);
    return clp ? clp_loss(batch, cfg.loss_cfg) : cl_loss(batch, cfg.loss_cfg);
}

TrainResult train(EncoderParams params, const EncoderConfig& config,
                  const std::vector<TrainingExample>& dataset, const TrainConfig& cfg,
                  const EpochRefresh& refresh) {
    cfg.validate();
    validate_params(params, config);
    if (cfg.freeze == FreezeMode::moe_only && !config.moe) {
        throw TrainingError("freeze mode moe_only requires an MoE model");
    }
    TrainResult result;
    if (cfg.epochs == 0) {
        result.params = std::move(params);
        return result;
    }
    if (dataset.empty()) {
        throw TrainingError("training dataset is empty");
    }
    check_dataset(dataset, cfg);

    const bool clp = cfg.loss == LossKind::clp;
    Rng rng(cfg.seed);
    AdamState adam = AdamState::for_params(params);
    EncoderParams grads = zeros_like(params);
    std::size_t pending = 0;
    std::size_t step = 0;

    auto flush = [&]() {
        if (pending == 0) return;
        const double inv = 1.0 / static_cast<double>(pending);
        grads.for_each_tensor([inv](const std::string&, TensorKind, std::span<double> t) {
            for (double& x : t) x *= inv;
        });
        apply_freeze(grads, cfg.freeze);
        adam_step(params, grads, adam, cfg.learning_rate);
        ++result.optimizer_steps;
        grads = zeros_like(params);
        pending = 0;
    };

    std::vector<TrainingExample> refreshed;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<TrainingExample>* data = &dataset;
        if (refresh && epoch > 0) {
            refreshed = refresh(params, epoch);
            if (refreshed.empty()) {
                throw TrainingError("epoch refresh returned an empty dataset");
            }
            check_dataset(refreshed, cfg);
            data = &refreshed;
        }

        std::vector<std::size_t> order(data->size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);

        for (std::size_t idx : order) {
            const auto tokens = tokenize_example((*data)[idx], config, clp);
            const auto batch = embed_example(params, config, tokens, clp);
            const double loss = clp ? clp_loss(batch, cfg.loss_cfg) : cl_loss(batch, cfg.loss_cfg);
            if (!std::isfinite(loss)) {
                throw TrainingError("non-finite loss at step " + std::to_string(step));
            }
            result.trace.push_back({step, epoch, loss});

            const auto g = clp ? clp_loss_grad(batch, cfg.loss_cfg) : cl_loss_grad(batch, cfg.loss_cfg);
            backprop(params, config, tokens.query, g.query, grads);
            backprop(params, config, tokens.positive, g.positive, grads);
            for (std::size_t j = 0; j < tokens.negatives.size(); ++j) {
                backprop(params, config, tokens.negatives[j], g.negatives[j], grads);
            }
            if (clp && !cfg.stop_grad_neg_queries) {
                for (std::size_t j = 0; j < tokens.negative_queries.size(); ++j) {
                    for (std::size_t m = 0; m < tokens.negative_queries[j].size(); ++m) {
                        backprop(params, config, tokens.negative_queries[j][m],
                                 g.negative_queries[j][m], grads);
                    }
                }
            }

            ++step;
            if (++pending == cfg.grad_accum_steps) {
                flush();
            }
        }
        flush();
    }
    result.params = std::move(params);
    return result;
}

}  // namespace rlab
