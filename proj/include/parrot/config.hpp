#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace parrot {

// Simulation schemes. RwDist exists only for the analytic cost tables; the
// engine rejects it because it needs one live executor per client.
enum class Scheme { Sp, SdDist, FaDist, Parrot, RwDist };

enum class SchedulingMode {
    Uniform,      // every round divides the selection evenly ("none-uniform")
    FullHistory,  // greedy, workload model fitted on all past rounds
    TimeWindow,   // greedy, workload model fitted on the last tau rounds
    Random,       // uniform random device per client, comparison baseline
};

enum class ClockMode { Virtual, Real };

std::string_view to_string(Scheme s) noexcept;
std::string_view to_string(SchedulingMode m) noexcept;
std::string_view to_string(ClockMode c) noexcept;

Scheme parse_scheme(std::string_view s);
SchedulingMode parse_scheduling(std::string_view s);
ClockMode parse_clock(std::string_view s);

struct SimConfig {
    int total_clients = 0;       // M
    int concurrent_clients = 0;  // M_p
    int num_devices = 1;         // K
    int total_rounds = 1;        // R
    int local_epochs = 1;        // E
    int warmup_rounds = 1;       // R_w
    // Rounds of history used by time-window scheduling; nullopt means all history.
    std::optional<int> time_window = 5;
    std::uint64_t seed = 0;
    Scheme scheme = Scheme::Parrot;
    SchedulingMode scheduling = SchedulingMode::TimeWindow;
    ClockMode clock = ClockMode::Virtual;

    // Local optimizer and simulated transport.
    int batch_size = 20;  // 0 means full batch
    double learning_rate = 0.05;
    double trip_overhead_seconds = 0.0;

    // Throws ConfigError naming the violated constraint.
    void validate() const;

    // Window handed to the estimator: nullopt (all history) unless the
    // scheduling mode is time-window.
    std::optional<int> estimation_window() const noexcept;

    bool uses_workload_model() const noexcept {
        return scheduling == SchedulingMode::FullHistory ||
               scheduling == SchedulingMode::TimeWindow;
    }
};

// Parses the "sim" section of an experiment file. Unknown keys are errors.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json sim_config_to_json(const SimConfig& cfg);

// Loads a file whose top level is a SimConfig object.
SimConfig load_sim_config(const std::filesystem::path& path);

}  // namespace parrot
