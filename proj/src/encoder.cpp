#include "rlab/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace rlab {

void EncoderConfig::validate() const {
    if (vocab_size < 2) {
        throw EncoderError("encoder config: vocab_size must be >= 2");
    }
    if (d_model == 0) {
        throw EncoderError("encoder config: d_model must be positive");
    }
    if (d_intermediate < d_model) {
        throw EncoderError("encoder config: d_intermediate must be >= d_model");
    }
    if (moe) {
        if (moe->num_experts == 0 || moe->experts_per_token == 0) {
            throw EncoderError("encoder config: MoE expert counts must be positive");
        }
        if (moe->experts_per_token > moe->num_experts) {
            throw EncoderError("encoder config: experts_per_token exceeds num_experts");
        }
        if (moe->experts_per_token != 1) {
            throw EncoderError("encoder config: unsupported experts_per_token " +
                               std::to_string(moe->experts_per_token) + " (only top-1 routing)");
        }
    }
}

std::string to_string(FreezeMode mode) {
    switch (mode) {
        case FreezeMode::full: return "full";
        case FreezeMode::intermediate_only: return "intermediate_only";
        case FreezeMode::moe_only: return "moe_only";
    }
    return "unknown";
}

FreezeMode parse_freeze_mode(std::string_view name) {
    if (name == "full") return FreezeMode::full;
    if (name == "intermediate_only" || name == "intermediate-only") return FreezeMode::intermediate_only;
    if (name == "moe_only" || name == "moe-only") return FreezeMode::moe_only;
    throw EncoderError("unknown freeze mode '" + std::string(name) + "'");
}

std::size_t EncoderParams::parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::string&, TensorKind, std::span<const double> t) { n += t.size(); });
    return n;
}

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    EncoderParams p;
    p.embedding = seeded_init(rng, config.vocab_size, config.d_model, 1.0);
    const Mat up = seeded_init(rng, config.d_model, config.d_intermediate,
                               1.0 / std::sqrt(static_cast<double>(config.d_model)));
    p.w_down = seeded_init(rng, config.d_intermediate, config.d_model,
                           1.0 / std::sqrt(static_cast<double>(config.d_intermediate)));
    p.b_down.assign(config.d_model, 0.0);
    p.w_up.assign(config.num_up_blocks(), up);
    p.b_up.assign(config.num_up_blocks(), Vec(config.d_intermediate, 0.0));
    if (config.moe) {
        p.gate = seeded_init(rng, config.d_model, config.moe->num_experts,
                             1.0 / std::sqrt(static_cast<double>(config.d_model)));
    }
    return p;
}

EncoderParams upcycle_to_moe(const EncoderParams& dense, const EncoderConfig& moe_config,
                             std::uint64_t seed) {
    moe_config.validate();
    if (!moe_config.moe) {
        throw EncoderError("upcycle_to_moe: target config has no MoE section");
    }
    if (dense.gate || dense.w_up.size() != 1) {
        throw EncoderError("upcycle_to_moe: source model is not dense");
    }
    EncoderConfig dense_config = moe_config;
    dense_config.moe.reset();
    validate_params(dense, dense_config);

    EncoderParams p = dense;
    p.w_up.assign(moe_config.moe->num_experts, dense.w_up[0]);
    p.b_up.assign(moe_config.moe->num_experts, dense.b_up[0]);
    Rng rng(seed);
    p.gate = seeded_init(rng, moe_config.d_model, moe_config.moe->num_experts,
                         1.0 / std::sqrt(static_cast<double>(moe_config.d_model)));
    return p;
}

EncoderParams zeros_like(const EncoderParams& params) {
    EncoderParams z = params;
    z.for_each_tensor([](const std::string&, TensorKind, std::span<double> t) {
        std::fill(t.begin(), t.end(), 0.0);
    });
    return z;
}

namespace {

void check_shape(const Mat& m, std::size_t rows, std::size_t cols, const std::string& name) {
    if (m.rows != rows || m.cols != cols || m.values.size() != rows * cols) {
        throw EncoderError("parameter " + name + ": expected shape " + std::to_string(rows) + "x" +
                           std::to_string(cols) + ", got " + std::to_string(m.rows) + "x" +
                           std::to_string(m.cols));
    }
}

void check_len(const Vec& v, std::size_t n, const std::string& name) {
    if (v.size() != n) {
        throw EncoderError("parameter " + name + ": expected length " + std::to_string(n) +
                           ", got " + std::to_string(v.size()));
    }
}

}  // namespace

void validate_params(const EncoderParams& p, const EncoderConfig& c) {
    c.validate();
    check_shape(p.embedding, c.vocab_size, c.d_model, "embedding");
    if (p.w_up.size() != c.num_up_blocks() || p.b_up.size() != c.num_up_blocks()) {
        throw EncoderError("parameters: expected " + std::to_string(c.num_up_blocks()) +
                           " up-projection blocks, got " + std::to_string(p.w_up.size()));
    }
    for (std::size_t e = 0; e < p.w_up.size(); ++e) {
        check_shape(p.w_up[e], c.d_model, c.d_intermediate, "w_up");
        check_len(p.b_up[e], c.d_intermediate, "b_up");
    }
    check_shape(p.w_down, c.d_intermediate, c.d_model, "w_down");
    check_len(p.b_down, c.d_model, "b_down");
    if (c.moe) {
        if (!p.gate) {
            throw EncoderError("parameters: MoE config but no gate tensor");
        }
        check_shape(*p.gate, c.d_model, c.moe->num_experts, "gate");
    } else if (p.gate) {
        throw EncoderError("parameters: gate tensor present but MoE disabled");
    }
    p.for_each_tensor([](const std::string& name, TensorKind, std::span<const double> t) {
        if (!all_finite(t)) {
            throw EncoderError("parameter " + name + " contains non-finite values");
        }
    });
}

namespace {

// a = x * W + b for W of shape (len(x) x len(b)).
Vec affine(std::span<const double> x, const Mat& w, const Vec& b) {
    Vec a = b;
    for (std::size_t i = 0; i < x.size(); ++i) {
        axpy(x[i], w.row(i), a);
    }
    return a;
}

Vec gate_probs(std::span<const double> x, const Mat& gate) {
    Vec logits(gate.cols, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        axpy(x[i], gate.row(i), logits);
    }
    return softmax_temperature(logits, 1.0);
}

// Forward state for one token, kept for the backward pass.
struct TokenTrace {
    std::size_t block = 0;  // expert index (0 for dense)
    double scale = 1.0;     // gate probability (1 for dense)
    Vec probs;              // gate distribution (MoE only)
    Vec pre;                // pre-activation x * w_up + b_up
    Vec h;                  // scale * relu(pre)
};

TokenTrace forward_intermediate(std::span<const double> x, const EncoderParams& p,
                                const EncoderConfig& c) {
    TokenTrace t;
    if (c.moe) {
        t.probs = gate_probs(x, *p.gate);
        t.block = static_cast<std::size_t>(
            std::max_element(t.probs.begin(), t.probs.end()) - t.probs.begin());
        t.scale = t.probs[t.block];
    }
    t.pre = affine(x, p.w_up[t.block], p.b_up[t.block]);
    t.h.resize(t.pre.size());
    for (std::size_t j = 0; j < t.pre.size(); ++j) {
        t.h[j] = t.scale * std::max(t.pre[j], 0.0);
    }
    return t;
}

struct ForwardTrace {
    std::vector<TokenTrace> tokens;
    Vec pool;
    double pool_norm = 0.0;
    Vec output;
};

ForwardTrace forward(const EncoderParams& p, const EncoderConfig& c,
                     std::span<const TokenId> tokens) {
    if (tokens.empty()) {
        throw EncoderError("empty input");
    }
    ForwardTrace f;
    f.pool.assign(c.d_model, 0.0);
    f.tokens.reserve(tokens.size());
    const double inv_n = 1.0 / static_cast<double>(tokens.size());
    for (TokenId id : tokens) {
        if (id >= c.vocab_size) {
            throw EncoderError("token id " + std::to_string(id) + " outside vocabulary");
        }
        const auto x = p.embedding.row(id);
        TokenTrace t = forward_intermediate(x, p, c);
        Vec y = affine(t.h, p.w_down, p.b_down);
        for (std::size_t i = 0; i < y.size(); ++i) {
            f.pool[i] += (y[i] + x[i]) * inv_n;
        }
        f.tokens.push_back(std::move(t));
    }
    f.pool_norm = norm(f.pool);
    f.output = l2_normalize(f.pool);
    return f;
}

}  // namespace

MoERoute moe_intermediate_forward(std::span<const double> x, const EncoderParams& params,
                                  const EncoderConfig& config) {
    if (!config.moe || !params.gate) {
        throw EncoderError("moe_intermediate_forward: MoE not enabled");
    }
    if (x.size() != config.d_model) {
        throw EncoderError("moe_intermediate_forward: input dimension mismatch");
    }
    TokenTrace t = forward_intermediate(x, params, config);
    return MoERoute{std::move(t.h), t.block, t.scale, std::move(t.probs)};
}

Vec encode_tokens(const EncoderParams& params, const EncoderConfig& config,
                  std::span<const TokenId> tokens) {
    return forward(params, config, tokens).output;
}

Vec encode(const EncoderParams& params, const EncoderConfig& config, std::string_view text) {
    const auto tokens = tokenize(text, config.vocab_size);
    return encode_tokens(params, config, tokens);
}

namespace {

// Backward pass. Calls on_token_input(i, dx) with each token's input-embedding
// gradient before it is added to grads.embedding.
template <typename OnTokenInput>
void backward(const EncoderParams& p, const EncoderConfig& c, std::span<const TokenId> tokens,
              const ForwardTrace& f, std::span<const double> upstream, EncoderParams& g,
              double scale, OnTokenInput&& on_token_input) {
    const std::size_t dm = c.d_model;
    const std::size_t di = c.d_intermediate;

    // out = pool / |pool|  =>  d pool = (u - out (out . u)) / |pool|
    const double proj = dot(f.output, upstream);
    Vec d_y(dm);
    const double inv_n = 1.0 / static_cast<double>(tokens.size());
    for (std::size_t i = 0; i < dm; ++i) {
        d_y[i] = scale * (upstream[i] - f.output[i] * proj) / f.pool_norm * inv_n;
    }

    axpy(static_cast<double>(tokens.size()), d_y, g.b_down);

    Vec d_h(di);
    Vec d_pre(di);
    Vec d_x(dm);
    for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
        const TokenTrace& t = f.tokens[ti];
        const auto x = p.embedding.row(tokens[ti]);

        // y = h * w_down + b_down + x
        for (std::size_t j = 0; j < di; ++j) {
            if (t.h[j] != 0.0) {
                axpy(t.h[j], d_y, g.w_down.row(j));
            }
            d_h[j] = dot(p.w_down.row(j), d_y);
        }
        d_x = d_y;

        // h = scale * relu(pre); relu'(0) taken as 0.
        double d_scale = 0.0;
        for (std::size_t j = 0; j < di; ++j) {
            const bool active = t.pre[j] > 0.0;
            d_pre[j] = active ? t.scale * d_h[j] : 0.0;
            if (active) {
                d_scale += d_h[j] * t.pre[j];
            }
        }

        Mat& gw = g.w_up[t.block];
        axpy(1.0, d_pre, g.b_up[t.block]);
        const Mat& w = p.w_up[t.block];
        for (std::size_t i = 0; i < dm; ++i) {
            axpy(x[i], d_pre, gw.row(i));
            d_x[i] += dot(w.row(i), d_pre);
        }

        if (c.moe) {
            // scale = softmax(x * gate)[block]
            const std::size_t ne = t.probs.size();
            Vec d_logit(ne);
            for (std::size_t e = 0; e < ne; ++e) {
                const double delta = e == t.block ? 1.0 : 0.0;
                d_logit[e] = d_scale * t.scale * (delta - t.probs[e]);
            }
            for (std::size_t i = 0; i < dm; ++i) {
                axpy(x[i], d_logit, g.gate->row(i));
                d_x[i] += dot(p.gate->row(i), d_logit);
            }
        }

        on_token_input(ti, d_x);
        axpy(1.0, d_x, g.embedding.row(tokens[ti]));
    }
}

}  // namespace

Vec accumulate_encode_grad(const EncoderParams& params, const EncoderConfig& config,
                           std::span<const TokenId> tokens, std::span<const double> upstream,
                           EncoderParams& grads, double scale) {
    if (upstream.size() != config.d_model) {
        throw EncoderError("encode gradient: upstream dimension mismatch");
    }
    ForwardTrace f = forward(params, config, tokens);
    backward(params, config, tokens, f, upstream, grads, scale, [](std::size_t, const Vec&) {});
    return std::move(f.output);
}

EncodeGrad encode_with_grad(const EncoderParams& params, const EncoderConfig& config,
                            std::string_view text, std::span<const double> upstream) {
    if (upstream.size() != config.d_model) {
        throw EncoderError("encode_with_grad: upstream dimension mismatch");
    }
    const auto tokens = tokenize(text, config.vocab_size);
    ForwardTrace f = forward(params, config, tokens);
    EncodeGrad out;
    out.params = zeros_like(params);
    out.token_inputs.resize(tokens.size());
    for (const auto& t : f.tokens) {
        out.routes.push_back(t.block);
    }
    backward(params, config, tokens, f, upstream, out.params, 1.0,
             [&](std::size_t i, const Vec& dx) { out.token_inputs[i] = dx; });
    out.output = std::move(f.output);
    return out;
}

}  // namespace rlab
