#include <parrot/schedule.hpp>

#include <parrot/errors.hpp>
#include <parrot/rng.hpp>

#include <algorithm>
#include <limits>
#include <numeric>

namespace parrot {

std::string_view to_string(PlanMode m) noexcept {
    switch (m) {
    case PlanMode::WarmupUniform: return "warmup-uniform";
    case PlanMode::Greedy: return "greedy";
    case PlanMode::RandomBaseline: return "random-baseline";
    }
    return "?";
}

double RoundPlan::predicted_makespan() const noexcept {
    double m = 0.0;
    for (double w : predicted_loads) {
        m = std::max(m, w);
    }
    return m;
}

namespace {

const ClientProfile& profile_of(std::span<const ClientProfile> profiles, int client_id) {
    if (client_id < 0 || static_cast<std::size_t>(client_id) >= profiles.size() ||
        profiles[static_cast<std::size_t>(client_id)].client_id != client_id) {
        throw Error("schedule: no profile for client " + std::to_string(client_id));
    }
    return profiles[static_cast<std::size_t>(client_id)];
}

void fill_predicted_loads(RoundPlan& plan, std::span<const WorkloadFit> fits,
                          std::span<const ClientProfile> profiles) {
    plan.predicted_loads.assign(plan.assignments.size(), 0.0);
    if (fits.size() < plan.assignments.size()) {
        return;
    }
    for (std::size_t k = 0; k < plan.assignments.size(); ++k) {
        if (!fits[k].valid()) {
            std::fill(plan.predicted_loads.begin(), plan.predicted_loads.end(), 0.0);
            return;
        }
        for (int c : plan.assignments[k]) {
            plan.predicted_loads[k] += predict(fits[k], profile_of(profiles, c).sample_count);
        }
    }
}

}  // namespace

RoundPlan uniform_division(int round, std::span<const int> clients, int num_devices) {
    if (num_devices < 1) {
        throw ConfigError("schedule: need at least one device");
    }
    RoundPlan plan;
    plan.round = round;
    plan.mode = PlanMode::WarmupUniform;
    const auto k = static_cast<std::size_t>(num_devices);
    plan.assignments.resize(k);
    plan.predicted_loads.assign(k, 0.0);
    const std::size_t base = clients.size() / k;
    const std::size_t extra = clients.size() % k;
    std::size_t pos = 0;
    for (std::size_t d = 0; d < k; ++d) {
        const std::size_t n = base + (d < extra ? 1 : 0);
        plan.assignments[d].assign(clients.begin() + static_cast<std::ptrdiff_t>(pos),
                                   clients.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
    }
    return plan;
}

RoundPlan greedy_assign(int round, std::span<const int> clients, std::span<const WorkloadFit> fits,
                        std::span<const ClientProfile> profiles) {
    if (fits.empty()) {
        throw ConfigError("schedule: need at least one device");
    }
    const std::size_t k = fits.size();
    RoundPlan plan;
    plan.round = round;
    plan.mode = PlanMode::Greedy;
    plan.assignments.resize(k);
    plan.predicted_loads.assign(k, 0.0);

    struct Task {
        int client;
        std::int64_t samples;
    };
    std::vector<Task> order;
    order.reserve(clients.size());
    for (int c : clients) {
        order.push_back(Task{c, profile_of(profiles, c).sample_count});
    }
    std::sort(order.begin(), order.end(), [](const Task& a, const Task& b) {
        return a.samples != b.samples ? a.samples > b.samples : a.client < b.client;
    });

    auto& w = plan.predicted_loads;
    // Track the largest and second-largest load so max_{j != k} w_j is O(1).
    std::size_t top = 0;
    for (const auto& task : order) {
        double second = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j != top) {
                second = std::max(second, w[j]);
            }
        }
        std::size_t best = 0;
        double best_span = std::numeric_limits<double>::infinity();
        double best_load = std::numeric_limits<double>::infinity();
        for (std::size_t d = 0; d < k; ++d) {
            const double load = w[d] + predict(fits[d], task.samples);
            const double others = d == top ? second : w[top];
            const double span = std::max(others, load);
            if (span < best_span || (span == best_span && load < best_load)) {
                best = d;
                best_span = span;
                best_load = load;
            }
            ++plan.candidate_evaluations;
        }
        w[best] = best_load;
        plan.assignments[best].push_back(task.client);
        if (w[best] > w[top] || (w[best] == w[top] && best < top)) {
            top = best;
        }
    }
    return plan;
}

RoundPlan random_assign(int round, std::span<const int> clients, int num_devices, std::uint64_t seed) {
    if (num_devices < 1) {
        throw ConfigError("schedule: need at least one device");
    }
    RoundPlan plan;
    plan.round = round;
    plan.mode = PlanMode::RandomBaseline;
    plan.assignments.resize(static_cast<std::size_t>(num_devices));
    plan.predicted_loads.assign(static_cast<std::size_t>(num_devices), 0.0);
    auto rng = make_rng(seed, stream::kRandomSchedule, {static_cast<std::uint64_t>(round)});
    std::uniform_int_distribution<int> pick(0, num_devices - 1);
    for (int c : clients) {
        plan.assignments[static_cast<std::size_t>(pick(rng))].push_back(c);
    }
    return plan;
}

RoundPlan schedule(int round, const ClientSelection& selected, std::span<const WorkloadFit> fits,
                   std::span<const ClientProfile> profiles, const ScheduleOptions& options) {
    const std::span<const int> clients(selected.selected);
    if (options.mode == SchedulingMode::Random) {
        auto plan = random_assign(round, clients, options.num_devices, options.seed);
        fill_predicted_loads(plan, fits, profiles);
        return plan;
    }
    bool fits_ok = options.mode != SchedulingMode::Uniform && round > options.warmup_rounds &&
                   fits.size() == static_cast<std::size_t>(options.num_devices);
    for (const auto& f : fits) {
        fits_ok = fits_ok && f.valid();
    }
    if (!fits_ok) {
        auto plan = uniform_division(round, clients, options.num_devices);
        fill_predicted_loads(plan, fits, profiles);
        return plan;
    }
    return greedy_assign(round, clients, fits, profiles);
}

std::vector<double> device_loads(const RoundPlan& plan, std::span<const LinearTimeModel> truth,
                                 std::span<const ClientProfile> profiles) {
    if (truth.size() < plan.assignments.size()) {
        throw Error("makespan: missing ground-truth model for some device");
    }
    std::vector<double> loads(plan.assignments.size(), 0.0);
    for (std::size_t k = 0; k < plan.assignments.size(); ++k) {
        for (int c : plan.assignments[k]) {
            loads[k] += static_cast<double>(profile_of(profiles, c).sample_count) * truth[k].t_sample +
                        truth[k].b;
        }
    }
    return loads;
}

double makespan(const RoundPlan& plan, std::span<const LinearTimeModel> truth,
                std::span<const ClientProfile> profiles) {
    const auto loads = device_loads(plan, truth, profiles);
    double m = 0.0;
    for (double l : loads) {
        m = std::max(m, l);
    }
    return m;
}

std::vector<ClientProfile> profiles_from_sizes(std::span<const std::int64_t> sizes) {
    std::vector<ClientProfile> out(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        out[i].client_id = static_cast<int>(i);
        out[i].sample_count = sizes[i];
    }
    return out;
}

void write_plan_header(std::ostream& out) {
    out << "round\tdevice\tmode\tpredicted_load\tclients\n";
}

void write_plan(std::ostream& out, const RoundPlan& plan) {
    for (std::size_t k = 0; k < plan.assignments.size(); ++k) {
        out << plan.round << '\t' << k << '\t' << to_string(plan.mode) << '\t'
            << (k < plan.predicted_loads.size() ? plan.predicted_loads[k] : 0.0) << '\t';
        for (std::size_t i = 0; i < plan.assignments[k].size(); ++i) {
            out << (i ? "," : "") << plan.assignments[k][i];
        }
        out << '\n';
    }
}

}  // namespace parrot
