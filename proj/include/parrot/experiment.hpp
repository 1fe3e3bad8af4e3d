#pragma once

#include <parrot/config.hpp>
#include <parrot/data.hpp>
#include <parrot/engine.hpp>
#include <parrot/plugin.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace parrot {

struct DataSpec {
    std::int64_t samples = 20000;
    std::int64_t holdout = 2000;  // 0 disables evaluation
    GeneratorParams generator;
    PartitionSpec partition;
};

struct DeviceSpec {
    std::vector<double> hetero_ratios;  // cycled over devices; empty = homogeneous
    bool dynamic = false;
    double t_sample = 0.002;
    double b = 0.05;
    double noise = 0.0;
};

// Axes of a comparison sweep. An empty axis keeps the base value.
struct SweepSpec {
    std::vector<Scheme> schemes;
    std::vector<SchedulingMode> scheduling;
    std::vector<int> num_devices;
    std::vector<bool> dynamic;

    bool empty() const noexcept {
        return schemes.empty() && scheduling.empty() && num_devices.empty() && dynamic.empty();
    }
};

// One experiment file. Sections: sim, data, model, algorithm, devices,
// output, sweep. Unknown keys anywhere are errors.
struct ExperimentSpec {
    SimConfig sim;
    DataSpec data;
    double init_scale = 0.01;
    PluginConfig algorithm;
    DeviceSpec devices;
    std::string output_dir = "results";
    SweepSpec sweep;
};

ExperimentSpec experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentSpec& spec);
// Throws ConfigError on unreadable files, bad JSON or invalid values.
ExperimentSpec load_experiment(const std::filesystem::path& path);

struct ExperimentResult {
    std::vector<RoundOutcome> rounds;
    CostUnits units;
    nlohmann::json summary;
};

// Runs one experiment and writes into `out_dir`: spec.json, rounds.tsv,
// timings.tsv, plans.tsv, summary.json, summary.txt.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

struct SweepArm {
    std::string name;
    ExperimentSpec spec;
};

// Cartesian product of the sweep axes; every arm shares the base seed.
// sp arms run on one device and sd-dist arms on M_p devices.
std::vector<SweepArm> expand_sweep(const ExperimentSpec& spec);

// One subdirectory per arm plus sweep_summary.tsv.
void run_sweep(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

// Tables over every result directory under `dir` (or `dir` itself). Returns
// "no results" text when none is found.
std::string report_directory(const std::filesystem::path& dir);

}  // namespace parrot
