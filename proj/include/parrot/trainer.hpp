#pragma once

#include <parrot/plugin.hpp>

#include <functional>
#include <optional>

namespace parrot {

struct TrainReport {
    ParamBundle client_result;
    std::optional<ClientState> new_state;
    std::int64_t samples_processed = 0;
    int local_steps = 0;
    double last_loss = 0.0;
    double measured_seconds = 0.0;  // wall time of the call; > 0 when samples were processed
};

// Runs one client's local training through `plugin` and times it.
// Throws NonFiniteLoss if training diverges.
TrainReport client_execute(const AlgorithmPlugin& plugin, const ClientProfile& client,
                           const SyntheticDataset& data, const ParamBundle& global,
                           const ClientState* state, const TrainOptions& options);

// Adds algorithm-specific terms to the data gradient at the current iterate.
using GradientHook = std::function<void(const ModelParams& current, ModelParams& grad)>;

struct SgdResult {
    ModelParams model;
    int steps = 0;
    std::int64_t samples_processed = 0;
    double last_loss = 0.0;
};

// E epochs of minibatch SGD from `start` on the client's samples. The batch
// order depends only on (seed, client_id, round), never on the executor.
SgdResult run_local_sgd(const ModelParams& start, const LocalTask& task,
                        const GradientHook& hook = {});

}  // namespace parrot
