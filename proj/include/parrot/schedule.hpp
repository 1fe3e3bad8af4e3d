#pragma once

#include <parrot/config.hpp>
#include <parrot/estimate.hpp>
#include <parrot/selection.hpp>

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace parrot {

enum class PlanMode { WarmupUniform, Greedy, RandomBaseline };

std::string_view to_string(PlanMode m) noexcept;

// Assignment of one round's selected clients to devices.
struct RoundPlan {
    int round = 0;
    std::vector<std::vector<int>> assignments;  // device -> clients, in execution order
    std::vector<double> predicted_loads;        // device -> predicted seconds (0 without fits)
    PlanMode mode = PlanMode::WarmupUniform;
    std::int64_t candidate_evaluations = 0;     // device candidates examined while planning

    int num_devices() const noexcept { return static_cast<int>(assignments.size()); }
    double predicted_makespan() const noexcept;
};

struct ScheduleOptions {
    int num_devices = 1;
    int warmup_rounds = 1;
    SchedulingMode mode = SchedulingMode::TimeWindow;
    std::uint64_t seed = 0;  // random baseline only
};

// Warm-up rounds (r <= warmup_rounds), uniform mode, or any invalid fit give
// an even split; random mode draws a device per client; otherwise greedy.
// `profiles` must be indexed by client id.
RoundPlan schedule(int round, const ClientSelection& selected, std::span<const WorkloadFit> fits,
                   std::span<const ClientProfile> profiles, const ScheduleOptions& options);

// Contiguous split of `clients` into `num_devices` lists whose sizes differ by at most one.
RoundPlan uniform_division(int round, std::span<const int> clients, int num_devices);

// Longest-first greedy: clients sorted by sample count (descending, ties by
// id); each goes to the device minimizing the resulting makespan, then the
// smaller resulting device load, then the lower device id.
RoundPlan greedy_assign(int round, std::span<const int> clients, std::span<const WorkloadFit> fits,
                        std::span<const ClientProfile> profiles);

RoundPlan random_assign(int round, std::span<const int> clients, int num_devices, std::uint64_t seed);

// Ground-truth per-device task time model, T = N * t_sample + b.
struct LinearTimeModel {
    double t_sample = 0.0;
    double b = 0.0;
};

std::vector<double> device_loads(const RoundPlan& plan, std::span<const LinearTimeModel> truth,
                                 std::span<const ClientProfile> profiles);

// max over devices of summed true task times; idle devices contribute 0.
double makespan(const RoundPlan& plan, std::span<const LinearTimeModel> truth,
                std::span<const ClientProfile> profiles);

// Clients 0..n-1 with the given sample counts (for planning on bare sizes).
std::vector<ClientProfile> profiles_from_sizes(std::span<const std::int64_t> sizes);

// Tab-separated: round, device, mode, predicted_load, clients (comma list).
void write_plan_header(std::ostream& out);
void write_plan(std::ostream& out, const RoundPlan& plan);

}  // namespace parrot
