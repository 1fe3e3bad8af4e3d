#include <parrot/trainer.hpp>

#include <parrot/errors.hpp>
#include <parrot/rng.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace parrot {

SgdResult run_local_sgd(const ModelParams& start, const LocalTask& task, const GradientHook& hook) {
    const auto& opts = task.options;
    if (opts.local_epochs < 1) {
        throw ConfigError("local_epochs must be >= 1");
    }
    SgdResult out{start, 0, 0, 0.0};
    std::vector<std::size_t> order = task.client.sample_indices;
    const std::size_t n = order.size();
    if (n == 0) {
        return out;
    }
    const bool full_batch = opts.batch_size <= 0 || static_cast<std::size_t>(opts.batch_size) >= n;
    const std::size_t batch = full_batch ? n : static_cast<std::size_t>(opts.batch_size);
    auto rng = make_rng(opts.seed, stream::kMinibatch,
                        {static_cast<std::uint64_t>(task.client.client_id),
                         static_cast<std::uint64_t>(opts.round)});

    ModelParams grad;
    for (int epoch = 0; epoch < opts.local_epochs; ++epoch) {
        if (!full_batch) {
            std::shuffle(order.begin(), order.end(), rng);
        }
        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t len = std::min(batch, n - begin);
            const std::span<const std::size_t> idx(order.data() + begin, len);
            const double loss = loss_and_gradient(out.model, task.data, idx, &grad);
            if (!std::isfinite(loss)) {
                throw NonFiniteLoss(task.client.client_id, opts.round, epoch);
            }
            if (hook) {
                hook(out.model, grad);
            }
            out.model.axpy(-opts.learning_rate, grad);
            out.last_loss = loss;
            out.samples_processed += static_cast<std::int64_t>(len);
            ++out.steps;
        }
        if (!out.model.all_finite()) {
            throw NonFiniteLoss(task.client.client_id, opts.round, epoch);
        }
    }
    return out;
}

TrainReport client_execute(const AlgorithmPlugin& plugin, const ClientProfile& client,
                           const SyntheticDataset& data, const ParamBundle& global,
                           const ClientState* state, const TrainOptions& options) {
    if (options.local_epochs < 1) {
        throw ConfigError("client_execute: local_epochs must be >= 1");
    }
    if (!global.contains(std::string(kModelPrefix) + ".weights")) {
        throw MissingEntry("client_execute: global payload carries no model");
    }
    const LocalTask task{client, data, global, plugin.is_stateful() ? state : nullptr, options};
    const auto t0 = std::chrono::steady_clock::now();
    LocalOutcome local = plugin.train(task);
    const auto t1 = std::chrono::steady_clock::now();

    TrainReport report;
    report.client_result = std::move(local.result);
    report.new_state = std::move(local.new_state);
    report.samples_processed = local.samples_processed;
    report.local_steps = local.local_steps;
    report.last_loss = local.last_loss;
    report.measured_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (report.samples_processed > 0 && !(report.measured_seconds > 0.0)) {
        // Coarse clocks can report zero for tiny clients.
        report.measured_seconds = 1e-9;
    }
    report.client_result.validate();
    return report;
}

}  // namespace parrot
