#pragma once

#include <parrot/aggregate.hpp>
#include <parrot/config.hpp>
#include <parrot/data.hpp>
#include <parrot/estimate.hpp>
#include <parrot/metrics.hpp>
#include <parrot/plugin.hpp>
#include <parrot/schedule.hpp>
#include <parrot/state_store.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

namespace parrot {

// Speed of one executor. In virtual-clock mode a task on N samples takes
// (N * t_true + b_true) * (1 + noise * z), z ~ N(0, 1), before slowdowns.
struct DeviceModel {
    int device_id = 0;
    double hetero_ratio = 0.0;  // eta_k
    bool dynamic = false;
    double t_true = 0.002;
    double b_true = 0.05;
    double noise = 0.0;  // relative standard deviation
};

// measured * (1 + eta_k), times (1 + cos(3.14 r / R + k)) when dynamic.
double report_time(double measured_seconds, const DeviceModel& device, int round, int total_rounds);

// Undisturbed virtual task time; the noise draw depends on (seed, round, client) only.
double virtual_task_seconds(const DeviceModel& device, std::int64_t samples, std::uint64_t seed,
                            int round, int client_id);

// K devices with the same ground truth; eta cycles through `hetero_ratios`.
std::vector<DeviceModel> make_device_models(int num_devices, const std::vector<double>& hetero_ratios,
                                            bool dynamic, double t_true, double b_true, double noise);

struct RoundOutcome {
    int round = 0;
    ParamBundle new_global;
    double simulated_round_seconds = 0.0;  // max over devices of device_loads
    double wall_seconds = 0.0;
    std::vector<double> device_loads;  // reported task time plus trip overheads, per device
    std::optional<Evaluation> evaluation;
    std::optional<double> estimation_error;
    double fit_seconds = 0.0;
    double schedule_seconds = 0.0;
    std::optional<RoundPlan> plan;  // parrot and sd-dist
    std::vector<TimingRecord> timings;
    CostLedger ledger;
};

// Everything a run needs. The pointed-to objects must outlive the Simulation.
struct SimulationInputs {
    SimConfig cfg;
    const AlgorithmPlugin* plugin = nullptr;
    const SyntheticDataset* train = nullptr;
    const SyntheticDataset* holdout = nullptr;  // optional
    std::vector<ClientProfile> profiles;        // indexed by client id
    std::vector<DeviceModel> devices;           // one per executor (K; ignored for sp)
    ParamBundle initial_global;
    std::filesystem::path state_dir;  // required when the plugin is stateful
    bool capture_states = false;      // keep every saved state in memory (tests)
};

// Round driver. Executor threads start in the constructor and stop in the
// destructor; step() runs one full round and blocks until it is folded.
class Simulation {
public:
    explicit Simulation(SimulationInputs inputs);
    ~Simulation();

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    // Throws DeviceFailure if an executor reports an error.
    RoundOutcome step();
    bool done() const noexcept;
    int next_round() const noexcept;

    const ParamBundle& global() const noexcept;
    const TimingHistory& history() const noexcept;
    const SimConfig& config() const noexcept;

    // Null for stateless plugins.
    StateStore* state_store() noexcept;
    // Closes and reopens the state store from disk, between rounds.
    void reopen_state_store();

    // States saved during the last step(), by client (capture_states only).
    std::map<int, ClientState> captured_states() const;

    // Unit sizes observed so far, for expected_costs().
    CostUnits observed_units() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Runs all remaining rounds.
std::vector<RoundOutcome> run(SimulationInputs inputs);

// Per-round results, tab-separated.
void write_round_header(std::ostream& out);
void write_round(std::ostream& out, const SimConfig& cfg, const RoundOutcome& o);

}  // namespace parrot
