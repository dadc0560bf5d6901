#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rlab/data.hpp"
#include "rlab/encoder.hpp"
#include "rlab/losses.hpp"

namespace rlab {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LossKind { cl, clp };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct TrainConfig {
    double learning_rate = 1e-5;
    std::size_t epochs = 1;
    std::size_t grad_accum_steps = 4;
    LossKind loss = LossKind::cl;
    LossConfig loss_cfg;
    FreezeMode freeze = FreezeMode::full;
    std::uint64_t seed = 0;
    // Treat negatives' query embeddings as constants (no backprop through them).
    bool stop_grad_neg_queries = false;

    void validate() const;
};

struct AdamState {
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    EncoderParams m;
    EncoderParams v;
    std::uint64_t step = 0;

    static AdamState for_params(const EncoderParams& params);
};

// One bias-corrected Adam update of every tensor.
void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state, double lr);

// Zeroes the gradients of every tensor the mode freezes:
//   full               nothing
//   intermediate_only  all but w_up / b_up (every expert)
//   moe_only           all but expert w_up / b_up and the gate; requires MoE
void apply_freeze(EncoderParams& grads, FreezeMode mode);

// True when the tensor kind is updated under the mode.
bool is_trainable(TensorKind kind, FreezeMode mode);

struct LossStep {
    std::size_t step = 0;  // example counter across the whole run, from 0
    std::size_t epoch = 0;
    double loss = 0.0;
};

struct TrainResult {
    EncoderParams params;
    std::vector<LossStep> trace;
    std::size_t optimizer_steps = 0;
};

// Called before every epoch after the first with the current parameters;
// returns the dataset to use for that epoch (used for re-mining negatives).
using EpochRefresh =
    std::function<std::vector<TrainingExample>(const EncoderParams& params, std::size_t epoch)>;

// The configured loss of one example under the current parameters.
double example_loss(const EncoderParams& params, const EncoderConfig& config,
                    const TrainingExample& example, const TrainConfig& cfg);

// Runs the fine-tuning loop. Per epoch the dataset is visited in an order
// shuffled by cfg.seed; gradients of grad_accum_steps consecutive examples are
// averaged before one Adam step. A partial accumulation group is flushed at the
// end of each epoch.
TrainResult train(EncoderParams params, const EncoderConfig& config,
                  const std::vector<TrainingExample>& dataset, const TrainConfig& cfg,
                  const EpochRefresh& refresh = {});

}  // namespace rlab
