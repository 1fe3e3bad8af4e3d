#include <parrot/plugin.hpp>

#include <parrot/errors.hpp>
#include <parrot/json_util.hpp>
#include <parrot/trainer.hpp>

namespace parrot {

ParamBundle AlgorithmPlugin::initial_global(const ModelParams& init) const {
    ParamBundle g;
    put_params(g, kModelPrefix, init);
    return g;
}

ClientState AlgorithmPlugin::default_state(int client_id, const ParamBundle&) const {
    return ClientState{client_id, -1, {}};
}

namespace {

ModelParams state_params(const ClientState& s, std::string_view prefix) {
    const std::string p(prefix);
    auto w = s.payload.find(p + ".weights");
    auto b = s.payload.find(p + ".bias");
    if (w == s.payload.end() || b == s.payload.end()) {
        throw MissingEntry("client " + std::to_string(s.client_id) + " state lacks '" + p + "'");
    }
    return ModelParams{w->second, b->second};
}

void put_state_params(ClientState& s, std::string_view prefix, const ModelParams& m) {
    const std::string p(prefix);
    s.payload[p + ".weights"] = m.weights;
    s.payload[p + ".bias"] = m.bias;
}

ModelParams zeros_like(const ModelParams& m) {
    return ModelParams::zeros(m.n_classes(), m.n_features());
}

ModelParams difference(const ModelParams& a, const ModelParams& b) {
    ModelParams d = a;
    d.axpy(-1.0, b);
    return d;
}

ParamBundle replace_model(const ParamBundle& old_global, const ModelParams& model) {
    ParamBundle g = old_global;
    put_params(g, kModelPrefix, model);
    return g;
}

double sample_weight(const LocalTask& t) {
    return static_cast<double>(t.client.sample_count);
}

// Result: local model, weighted by sample count.
class FedAvg : public AlgorithmPlugin {
public:
    std::string_view name() const noexcept override { return "fedavg"; }

    LocalOutcome train(const LocalTask& task) const override {
        const auto start = get_params(task.global);
        auto sgd = run_local_sgd(start, task, hook(start));
        LocalOutcome out;
        put_params(out.result, kModelPrefix, sgd.model, AggOp::WeightedAverage, sample_weight(task));
        extend_result(out.result, task, sgd);
        out.samples_processed = sgd.samples_processed;
        out.local_steps = sgd.steps;
        out.last_loss = sgd.last_loss;
        return out;
    }

    ParamBundle server_update(const ParamBundle& old_global, const AggregateResult& agg,
                              const ServerContext&) const override {
        return replace_model(old_global, get_params(agg.averaged));
    }

protected:
    virtual GradientHook hook(const ModelParams&) const { return {}; }
    virtual void extend_result(ParamBundle&, const LocalTask&, const SgdResult&) const {}
};

// FedAvg with the proximal term (mu/2)||w - w_global||^2.
class FedProx final : public FedAvg {
public:
    explicit FedProx(double mu) : mu_(mu) {}
    std::string_view name() const noexcept override { return "fedprox"; }

protected:
    GradientHook hook(const ModelParams& global) const override {
        if (mu_ == 0.0) {
            return {};
        }
        return [this, &global](const ModelParams& w, ModelParams& g) {
            for (std::size_t i = 0; i < g.weights.numel(); ++i) {
                g.weights.data[i] += mu_ * (w.weights.data[i] - global.weights.data[i]);
            }
            for (std::size_t i = 0; i < g.bias.numel(); ++i) {
                g.bias.data[i] += mu_ * (w.bias.data[i] - global.bias.data[i]);
            }
        };
    }

private:
    double mu_;
};

// FedAvg that also sends each client's local bias as a Special Param: the
// server collects it per client without averaging.
class FedAvgCollect final : public FedAvg {
public:
    std::string_view name() const noexcept override { return "fedavg-collect"; }

protected:
    void extend_result(ParamBundle& result, const LocalTask& task, const SgdResult& sgd) const override {
        result.set("personal.bias", sgd.model.bias, AggOp::Collect, 1.0, task.client.client_id);
    }
};

// Normalized averaging: clients send (w_global - w_local) / tau_m plus the
// sums of N_m * tau_m and N_m so the server can rescale by the effective
// number of local steps.
class FedNova final : public AlgorithmPlugin {
public:
    std::string_view name() const noexcept override { return "fednova"; }

    LocalOutcome train(const LocalTask& task) const override {
        const auto start = get_params(task.global);
        auto sgd = run_local_sgd(start, task);
        const double n = sample_weight(task);
        LocalOutcome out;
        if (sgd.steps > 0) {
            auto direction = difference(start, sgd.model);
            direction.scale(1.0 / sgd.steps);
            put_params(out.result, "nova.direction", direction, AggOp::WeightedAverage, n);
        } else {
            put_params(out.result, "nova.direction", zeros_like(start), AggOp::WeightedAverage, n);
        }
        out.result.set("nova.weighted_steps", Tensor::scalar(n * sgd.steps), AggOp::Sum);
        out.result.set("nova.samples", Tensor::scalar(n), AggOp::Sum);
        out.samples_processed = sgd.samples_processed;
        out.local_steps = sgd.steps;
        out.last_loss = sgd.last_loss;
        return out;
    }

    ParamBundle server_update(const ParamBundle& old_global, const AggregateResult& agg,
                              const ServerContext&) const override {
        const auto direction = get_params(agg.averaged, "nova.direction");
        const double steps = agg.averaged.tensor("nova.weighted_steps").data.at(0);
        const double samples = agg.averaged.tensor("nova.samples").data.at(0);
        if (!(samples > 0.0)) {
            throw MissingEntry("fednova: aggregate carries no samples");
        }
        auto model = get_params(old_global);
        model.axpy(-(steps / samples), direction);
        return replace_model(old_global, model);
    }
};

// SCAFFOLD (control variates, option II update). Server control variate
// lives in the global payload as "scaffold.c"; each client keeps c_i.
class Scaffold final : public AlgorithmPlugin {
public:
    std::string_view name() const noexcept override { return "scaffold"; }
    bool is_stateful() const noexcept override { return true; }

    ParamBundle initial_global(const ModelParams& init) const override {
        auto g = AlgorithmPlugin::initial_global(init);
        put_params(g, "scaffold.c", zeros_like(init));
        return g;
    }

    ClientState default_state(int client_id, const ParamBundle& global) const override {
        ClientState s{client_id, -1, {}};
        put_state_params(s, "c", zeros_like(get_params(global)));
        return s;
    }

    LocalOutcome train(const LocalTask& task) const override {
        const auto start = get_params(task.global);
        const auto c = get_params(task.global, "scaffold.c");
        const auto ci = task.state != nullptr ? state_params(*task.state, "c") : zeros_like(start);
        const auto correction = difference(c, ci);
        auto sgd = run_local_sgd(start, task, [&correction](const ModelParams&, ModelParams& g) {
            g.axpy(1.0, correction);
        });

        // c_i+ = c_i - c + (w_global - w_local) / (steps * lr)
        auto ci_new = difference(ci, c);
        if (sgd.steps > 0) {
            ci_new.axpy(1.0 / (sgd.steps * task.options.learning_rate), difference(start, sgd.model));
        }
        LocalOutcome out;
        put_params(out.result, "scaffold.delta_y", difference(sgd.model, start), AggOp::WeightedAverage,
                   sample_weight(task));
        put_params(out.result, "scaffold.delta_c", difference(ci_new, ci), AggOp::SimpleAverage);
        ClientState s{task.client.client_id, task.options.round, {}};
        put_state_params(s, "c", ci_new);
        out.new_state = std::move(s);
        out.samples_processed = sgd.samples_processed;
        out.local_steps = sgd.steps;
        out.last_loss = sgd.last_loss;
        return out;
    }

    ParamBundle server_update(const ParamBundle& old_global, const AggregateResult& agg,
                              const ServerContext& ctx) const override {
        auto model = get_params(old_global);
        model.axpy(1.0, get_params(agg.averaged, "scaffold.delta_y"));
        auto c = get_params(old_global, "scaffold.c");
        const double frac = ctx.total_clients > 0
                                ? static_cast<double>(ctx.selected_clients) / ctx.total_clients
                                : 0.0;
        c.axpy(frac, get_params(agg.averaged, "scaffold.delta_c"));
        auto g = replace_model(old_global, model);
        put_params(g, "scaffold.c", c);
        return g;
    }
};

// FedDyn: dynamic regularization with a per-client gradient correction g_i
// (client state) and a server correction h (global payload, "feddyn.h").
class FedDyn final : public AlgorithmPlugin {
public:
    explicit FedDyn(double alpha) : alpha_(alpha) {}
    std::string_view name() const noexcept override { return "feddyn"; }
    bool is_stateful() const noexcept override { return true; }

    ParamBundle initial_global(const ModelParams& init) const override {
        auto g = AlgorithmPlugin::initial_global(init);
        put_params(g, "feddyn.h", zeros_like(init));
        return g;
    }

    ClientState default_state(int client_id, const ParamBundle& global) const override {
        ClientState s{client_id, -1, {}};
        put_state_params(s, "grad", zeros_like(get_params(global)));
        return s;
    }

    LocalOutcome train(const LocalTask& task) const override {
        const auto start = get_params(task.global);
        const auto gi = task.state != nullptr ? state_params(*task.state, "grad") : zeros_like(start);
        auto sgd = run_local_sgd(start, task, [&](const ModelParams& w, ModelParams& g) {
            // grad of  L_i(w) - <g_i, w> + (alpha/2)||w - w_global||^2
            g.axpy(-1.0, gi);
            g.axpy(alpha_, w);
            g.axpy(-alpha_, start);
        });
        auto gi_new = gi;
        gi_new.axpy(-alpha_, difference(sgd.model, start));

        LocalOutcome out;
        put_params(out.result, kModelPrefix, sgd.model, AggOp::SimpleAverage);
        ClientState s{task.client.client_id, task.options.round, {}};
        put_state_params(s, "grad", gi_new);
        out.new_state = std::move(s);
        out.samples_processed = sgd.samples_processed;
        out.local_steps = sgd.steps;
        out.last_loss = sgd.last_loss;
        return out;
    }

    ParamBundle server_update(const ParamBundle& old_global, const AggregateResult& agg,
                              const ServerContext& ctx) const override {
        const auto avg = get_params(agg.averaged);
        const auto prev = get_params(old_global);
        auto h = get_params(old_global, "feddyn.h");
        const double frac = ctx.total_clients > 0
                                ? static_cast<double>(ctx.selected_clients) / ctx.total_clients
                                : 0.0;
        h.axpy(-alpha_ * frac, difference(avg, prev));
        auto model = avg;
        model.axpy(-1.0 / alpha_, h);
        auto g = replace_model(old_global, model);
        put_params(g, "feddyn.h", h);
        return g;
    }

private:
    double alpha_;
};

}  // namespace

PluginConfig plugin_config_from_json(const nlohmann::json& j) {
    using namespace json_util;
    constexpr std::string_view where = "algorithm";
    require_object(j, where);
    require_known_keys(j, {"name", "mu", "alpha"}, where);
    PluginConfig cfg;
    cfg.name = get_or<std::string>(j, "name", cfg.name, where);
    cfg.mu = get_or<double>(j, "mu", cfg.mu, where);
    cfg.alpha = get_or<double>(j, "alpha", cfg.alpha, where);
    make_plugin(cfg);  // validates name and hyperparameters
    return cfg;
}

nlohmann::json plugin_config_to_json(const PluginConfig& cfg) {
    return nlohmann::json{{"name", cfg.name}, {"mu", cfg.mu}, {"alpha", cfg.alpha}};
}

std::unique_ptr<AlgorithmPlugin> make_plugin(const PluginConfig& cfg) {
    if (cfg.name == "fedavg") return std::make_unique<FedAvg>();
    if (cfg.name == "fedavg-collect") return std::make_unique<FedAvgCollect>();
    if (cfg.name == "fedprox") {
        if (!(cfg.mu >= 0.0)) throw ConfigError("algorithm.mu must be non-negative");
        return std::make_unique<FedProx>(cfg.mu);
    }
    if (cfg.name == "fednova") return std::make_unique<FedNova>();
    if (cfg.name == "scaffold") return std::make_unique<Scaffold>();
    if (cfg.name == "feddyn") {
        if (!(cfg.alpha > 0.0)) throw ConfigError("algorithm.alpha must be positive");
        return std::make_unique<FedDyn>(cfg.alpha);
    }
    throw ConfigError("algorithm.name: unknown algorithm '" + cfg.name +
                      "' (fedavg, fedavg-collect, fedprox, fednova, scaffold, feddyn)");
}

}  // namespace parrot
