#pragma once

#include <parrot/bundle.hpp>
#include <parrot/client_state.hpp>
#include <parrot/data.hpp>
#include <parrot/model.hpp>
#include <parrot/selection.hpp>

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace parrot {

struct TrainOptions {
    int local_epochs = 1;
    int batch_size = 20;  // 0 = full batch
    double learning_rate = 0.05;
    std::uint64_t seed = 0;  // root seed; minibatch order derives from (seed, client, round)
    int round = 0;
};

struct LocalTask {
    const ClientProfile& client;
    const SyntheticDataset& data;
    const ParamBundle& global;
    const ClientState* state;  // null for stateless plugins
    TrainOptions options;
};

struct LocalOutcome {
    ParamBundle result;
    std::optional<ClientState> new_state;
    std::int64_t samples_processed = 0;
    int local_steps = 0;
    double last_loss = 0.0;
};

struct ServerContext {
    int round = 0;
    int total_clients = 0;
    int selected_clients = 0;
};

// An FL algorithm: what a client computes and returns, what it keeps between
// rounds, and how the server turns the aggregate into the next global payload.
// Implementations are immutable and shared by all executor threads.
class AlgorithmPlugin {
public:
    virtual ~AlgorithmPlugin() = default;

    virtual std::string_view name() const noexcept = 0;
    virtual bool is_stateful() const noexcept { return false; }

    // Global payload for round 0.
    virtual ParamBundle initial_global(const ModelParams& init) const;

    // State handed to a client that has never saved one. Only called for
    // stateful plugins.
    virtual ClientState default_state(int client_id, const ParamBundle& global) const;

    virtual LocalOutcome train(const LocalTask& task) const = 0;

    // Throws MissingEntry when `agg` lacks an entry this plugin needs.
    virtual ParamBundle server_update(const ParamBundle& old_global, const AggregateResult& agg,
                                      const ServerContext& ctx) const = 0;
};

struct PluginConfig {
    std::string name = "fedavg";
    double mu = 0.01;     // FedProx proximal coefficient
    double alpha = 0.01;  // FedDyn regularizer
};

PluginConfig plugin_config_from_json(const nlohmann::json& j);
nlohmann::json plugin_config_to_json(const PluginConfig& cfg);

// fedavg, fedprox, fednova, scaffold, feddyn, fedavg-collect. Throws ConfigError.
std::unique_ptr<AlgorithmPlugin> make_plugin(const PluginConfig& cfg);

}  // namespace parrot
