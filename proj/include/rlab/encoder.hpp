#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlab/numerics.hpp"
#include "rlab/tokenizer.hpp"

namespace rlab {

class EncoderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MoEConfig {
    std::size_t num_experts = 2;
    std::size_t experts_per_token = 1;

    bool operator==(const MoEConfig&) const = default;
};

struct EncoderConfig {
    std::size_t vocab_size = 4096;
    std::size_t d_model = 64;
    std::size_t d_intermediate = 256;
    std::optional<MoEConfig> moe;

    // Throws EncoderError on any violated invariant, including top-k > 1 routing.
    void validate() const;
    std::size_t num_up_blocks() const { return moe ? moe->num_experts : 1; }

    bool operator==(const EncoderConfig&) const = default;
};

enum class FreezeMode { full, intermediate_only, moe_only };

std::string to_string(FreezeMode mode);
FreezeMode parse_freeze_mode(std::string_view name);

enum class TensorKind { embedding, up_weight, up_bias, down_weight, down_bias, gate };

// All weights of the toy encoder:
//
//   token t:  x = embedding[t]
//             h = relu(x * w_up + b_up)                   (dense)
//             h = p[e] * relu(x * w_up[e] + b_up[e])      (MoE, e = argmax p, p = softmax(x * gate))
//             y = h * w_down + b_down + x
//   text:     normalize(mean_t y)
//
// The dense model stores a single up-projection block; the MoE model stores
// one block per expert plus the gate. The same struct also carries gradients.
struct EncoderParams {
    Mat embedding;            // vocab_size x d_model
    std::vector<Mat> w_up;    // d_model x d_intermediate, one per expert
    std::vector<Vec> b_up;    // d_intermediate, one per expert
    Mat w_down;               // d_intermediate x d_model
    Vec b_down;               // d_model
    std::optional<Mat> gate;  // d_model x num_experts, MoE only

    bool operator==(const EncoderParams&) const = default;

    template <typename F>
    void for_each_tensor(F&& f) {
        f(std::string("embedding"), TensorKind::embedding, std::span<double>(embedding.values));
        for (std::size_t e = 0; e < w_up.size(); ++e) {
            f(up_name("w_up", e), TensorKind::up_weight, std::span<double>(w_up[e].values));
            f(up_name("b_up", e), TensorKind::up_bias, std::span<double>(b_up[e]));
        }
        f(std::string("w_down"), TensorKind::down_weight, std::span<double>(w_down.values));
        f(std::string("b_down"), TensorKind::down_bias, std::span<double>(b_down));
        if (gate) {
            f(std::string("gate"), TensorKind::gate, std::span<double>(gate->values));
        }
    }

    template <typename F>
    void for_each_tensor(F&& f) const {
        const_cast<EncoderParams*>(this)->for_each_tensor(
            [&](const std::string& name, TensorKind kind, std::span<double> data) {
                f(name, kind, std::span<const double>(data));
            });
    }

    std::size_t parameter_count() const;

private:
    std::string up_name(const char* base, std::size_t e) const {
        return w_up.size() == 1 && !gate ? std::string(base)
                                         : "experts." + std::to_string(e) + "." + base;
    }
};

// Seeded initialization. Draw order: embedding, w_up, w_down, gate. Biases
// start at zero. With MoE every expert starts as a copy of the dense w_up,
// so dense and MoE models built from one seed share the same backbone.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

// Converts a dense model to MoE: each expert copies w_up/b_up, the gate is
// drawn from `seed`.
EncoderParams upcycle_to_moe(const EncoderParams& dense, const EncoderConfig& moe_config,
                             std::uint64_t seed);

EncoderParams zeros_like(const EncoderParams& params);

// Shape and finiteness check against config. Throws EncoderError.
void validate_params(const EncoderParams& params, const EncoderConfig& config);

struct MoERoute {
    Vec h;             // d_intermediate, already scaled by gate_prob
    std::size_t route = 0;
    double gate_prob = 0.0;
    Vec probs;         // gate distribution over all experts
};

MoERoute moe_intermediate_forward(std::span<const double> x, const EncoderParams& params,
                                  const EncoderConfig& config);

Vec encode(const EncoderParams& params, const EncoderConfig& config, std::string_view text);
Vec encode_tokens(const EncoderParams& params, const EncoderConfig& config,
                  std::span<const TokenId> tokens);

struct EncodeGrad {
    Vec output;                     // encode(text)
    EncoderParams params;           // d(upstream . encode(text)) / d(theta)
    std::vector<Vec> token_inputs;  // gradient w.r.t. each token's input embedding row
    std::vector<std::size_t> routes;  // expert chosen per token (MoE only)
};

EncodeGrad encode_with_grad(const EncoderParams& params, const EncoderConfig& config,
                            std::string_view text, std::span<const double> upstream);

// grads += scale * d(upstream . encode(tokens)) / d(theta). Returns the forward output.
Vec accumulate_encode_grad(const EncoderParams& params, const EncoderConfig& config,
                           std::span<const TokenId> tokens, std::span<const double> upstream,
                           EncoderParams& grads, double scale = 1.0);

}  // namespace rlab
