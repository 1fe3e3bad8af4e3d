#include <parrot/engine.hpp>
#include <parrot/errors.hpp>
#include <parrot/transport.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

using namespace parrot;

namespace {

SimConfig config(Scheme scheme, int k, int m = 40, int mp = 20, int rounds = 6) {
    SimConfig c;
    c.total_clients = m;
    c.concurrent_clients = mp;
    c.num_devices = k;
    c.total_rounds = rounds;
    c.seed = 11;
    c.scheme = scheme;
    c.batch_size = 16;
    c.learning_rate = 0.1;
    return c;
}

std::vector<RoundOutcome> run_fixture(const testutil::Fixture& fx, std::vector<DeviceModel> devices = {}) {
    return run(fx.inputs(std::move(devices)));
}

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Fails on one client so the executor has to surface the error.
class ExplodingPlugin final : public AlgorithmPlugin {
public:
    explicit ExplodingPlugin(int victim) : victim_(victim), inner_(make_plugin(PluginConfig{})) {}
    std::string_view name() const noexcept override { return "exploding"; }
    LocalOutcome train(const LocalTask& task) const override {
        if (task.client.client_id == victim_) {
            throw Error("synthetic failure");
        }
        return inner_->train(task);
    }
    ParamBundle server_update(const ParamBundle& g, const AggregateResult& agg,
                              const ServerContext& ctx) const override {
        return inner_->server_update(g, agg, ctx);
    }

private:
    int victim_;
    std::unique_ptr<AlgorithmPlugin> inner_;
};

}  // namespace

TEST(ReportTime, Examples) {
    DeviceModel d;
    EXPECT_EQ(report_time(1.7, d, 3, 10), 1.7);
    d.dynamic = true;
    EXPECT_DOUBLE_EQ(report_time(1.0, d, 0, 10), 2.0);
    d.dynamic = false;
    d.hetero_ratio = 0.5;
    EXPECT_DOUBLE_EQ(report_time(2.0, d, 0, 10), 3.0);
    d.dynamic = true;
    d.device_id = 2;
    EXPECT_DOUBLE_EQ(report_time(2.0, d, 5, 10), 3.0 * (1.0 + std::cos(3.14 * 5.0 / 10.0 + 2.0)));
}

TEST(VirtualClock, NoiseDependsOnRoundAndClientOnly) {
    DeviceModel a;
    a.noise = 0.1;
    DeviceModel b = a;
    b.device_id = 3;
    EXPECT_EQ(virtual_task_seconds(a, 100, 5, 2, 7), virtual_task_seconds(b, 100, 5, 2, 7));
    EXPECT_NE(virtual_task_seconds(a, 100, 5, 2, 7), virtual_task_seconds(a, 100, 5, 3, 7));
    a.noise = 0.0;
    EXPECT_DOUBLE_EQ(virtual_task_seconds(a, 100, 5, 2, 7), 100 * 0.002 + 0.05);
    const auto devices = make_device_models(4, {0.0, 1.0}, true, 0.01, 0.0, 0.0);
    EXPECT_EQ(devices[2].hetero_ratio, 0.0);
    EXPECT_EQ(devices[3].hetero_ratio, 1.0);
    EXPECT_EQ(devices[3].device_id, 3);
}

TEST(Transport, RoutesByDevice) {
    InProcessTransport t(3);
    auto server = t.connect_server();
    auto d1 = t.connect_device(1);
    auto d2 = t.connect_device(2);
    server->send(Message{MessageKind::TaskAssignment, 4, 2, {std::byte{9}}});
    server->send(Message{MessageKind::TaskAssignment, 4, 1, {}});
    const auto m2 = d2->receive();
    ASSERT_TRUE(m2.has_value());
    EXPECT_EQ(m2->payload.size(), 1u);
    EXPECT_EQ(d1->receive()->device_id, 1);
    std::thread sender([&] { d2->send(Message{MessageKind::DeviceReport, 4, 99, {}}); });
    const auto report = server->receive();
    sender.join();
    ASSERT_TRUE(report.has_value());
    EXPECT_EQ(report->device_id, 2);
    EXPECT_EQ(report->kind, MessageKind::DeviceReport);
    d1->close();
    EXPECT_FALSE(d1->receive().has_value());
}

TEST(Engine, SchemesProduceTheSameModels) {
    const testutil::Fixture sp(config(Scheme::Sp, 1));
    const testutil::Fixture sd(config(Scheme::SdDist, 20));
    const testutil::Fixture fa(config(Scheme::FaDist, 4));
    const testutil::Fixture pa(config(Scheme::Parrot, 4));
    const auto ref = run_fixture(sp);
    for (const auto* fx : {&sd, &fa, &pa}) {
        const auto out = run_fixture(*fx);
        ASSERT_EQ(out.size(), ref.size());
        for (std::size_t r = 0; r < out.size(); ++r) {
            EXPECT_LE(testutil::bundle_rel_diff(out[r].new_global, ref[r].new_global), 1e-12)
                << to_string(fx->cfg.scheme) << " round " << r;
        }
    }
}

TEST(Engine, GroupingDoesNotChangeTheModel) {
    auto cfg = config(Scheme::Parrot, 4);
    std::vector<std::vector<RoundOutcome>> runs;
    for (auto mode : {SchedulingMode::Uniform, SchedulingMode::TimeWindow, SchedulingMode::Random}) {
        cfg.scheduling = mode;
        runs.push_back(run_fixture(testutil::Fixture(cfg)));
    }
    EXPECT_EQ(runs[1].back().plan->mode, PlanMode::Greedy);
    EXPECT_NE(runs[0].back().plan->assignments, runs[1].back().plan->assignments);
    for (std::size_t i = 1; i < runs.size(); ++i) {
        for (std::size_t r = 0; r < runs[0].size(); ++r) {
            EXPECT_LE(testutil::bundle_rel_diff(runs[i][r].new_global, runs[0][r].new_global), 1e-12);
        }
    }
}

TEST(Engine, TripsPerScheme) {
    const std::vector<std::pair<SimConfig, std::int64_t>> cases{
        {config(Scheme::Sp, 1), 0},
        {config(Scheme::SdDist, 20), 20},
        {config(Scheme::FaDist, 4), 20},
        {config(Scheme::Parrot, 4), 4},
    };
    for (const auto& [cfg, trips] : cases) {
        auto c = cfg;
        c.total_rounds = 3;
        for (const auto& o : run_fixture(testutil::Fixture(c))) {
            EXPECT_EQ(o.ledger.trips_up, trips) << to_string(c.scheme);
            EXPECT_EQ(o.ledger.trips_down, trips) << to_string(c.scheme);
            EXPECT_EQ(o.timings.size(), 20u);
        }
    }
}

TEST(Engine, VirtualRunsAreReproducible) {
    auto cfg = config(Scheme::Parrot, 3);
    const testutil::Fixture fx(cfg);
    const auto devices = make_device_models(3, {0.0, 0.5, 1.0}, true, 0.002, 0.05, 0.05);
    const auto a = run_fixture(fx, devices);
    const auto b = run_fixture(fx, devices);
    for (std::size_t r = 0; r < a.size(); ++r) {
        EXPECT_EQ(a[r].new_global, b[r].new_global);
        EXPECT_EQ(a[r].device_loads, b[r].device_loads);
        EXPECT_EQ(a[r].timings, b[r].timings);
        EXPECT_EQ(a[r].plan->assignments, b[r].plan->assignments);
        std::ostringstream sa;
        std::ostringstream sb;
        auto ra = a[r];
        auto rb = b[r];
        ra.wall_seconds = rb.wall_seconds = 0.0;
        write_round(sa, cfg, ra);
        write_round(sb, cfg, rb);
        EXPECT_EQ(sa.str(), sb.str());
    }
}

TEST(Engine, RoundTimeIsMaxDeviceLoad) {
    auto cfg = config(Scheme::Parrot, 4);
    cfg.trip_overhead_seconds = 0.25;
    const testutil::Fixture fx(cfg);
    for (const auto& o : run_fixture(fx)) {
        ASSERT_EQ(o.device_loads.size(), 4u);
        EXPECT_EQ(o.simulated_round_seconds, *std::max_element(o.device_loads.begin(), o.device_loads.end()));
        std::vector<double> per_device(4, 0.5);
        for (const auto& t : o.timings) per_device[static_cast<std::size_t>(t.device_id)] += t.reported_seconds;
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(o.device_loads[k], per_device[k], 1e-12);
    }
}

TEST(Engine, StableEnvironmentEstimatesWell) {
    auto cfg = config(Scheme::Parrot, 4, 40, 20, 10);
    const testutil::Fixture fx(cfg);
    const auto noiseless = run_fixture(fx, make_device_models(4, {0.0, 0.5, 1.0}, false, 0.002, 0.05, 0.0));
    for (const auto& o : noiseless) {
        if (o.round >= 2) {
            ASSERT_TRUE(o.estimation_error.has_value());
            EXPECT_LE(*o.estimation_error, 1e-9);
        }
    }
    const auto noisy = run_fixture(fx, make_device_models(4, {0.0, 0.5, 1.0}, false, 0.002, 0.05, 0.05));
    for (const auto& o : noisy) {
        if (o.round > 5) EXPECT_LE(*o.estimation_error, 0.10) << "round " << o.round;
    }
}

namespace {

std::vector<double> dynamic_errors(int k, SchedulingMode mode, std::optional<int> tau) {
    auto cfg = config(Scheme::Parrot, k, 40, 20, 30);
    cfg.scheduling = mode;
    cfg.time_window = tau;
    const auto devices = make_device_models(k, {0.0}, true, 0.002, 0.05, 0.0);
    std::vector<double> e;
    for (const auto& o : run_fixture(testutil::Fixture(cfg), devices)) {
        if (o.estimation_error) e.push_back(*o.estimation_error);
    }
    return e;
}

}  // namespace

TEST(Engine, FullHistoryErrorGrowsUnderSlowdown) {
    // One device, so the slowdown factor moves monotonically across the run.
    const auto full = dynamic_errors(1, SchedulingMode::FullHistory, std::nullopt);
    const auto half = static_cast<std::ptrdiff_t>(full.size() / 2);
    EXPECT_GT(mean(std::vector<double>(full.begin() + half, full.end())),
              mean(std::vector<double>(full.begin(), full.begin() + half)));
}

TEST(Engine, WindowBeatsFullHistoryUnderSlowdown) {
    for (int k : {1, 4}) {
        EXPECT_LT(mean(dynamic_errors(k, SchedulingMode::TimeWindow, 3)),
                  mean(dynamic_errors(k, SchedulingMode::FullHistory, std::nullopt)))
            << "K=" << k;
    }
}

// Sanity ordering of straggler behaviour, compared on averages over seeds.
TEST(Engine, SchemeStragglerOrdering) {
    double uniform_total = 0.0;
    double pulling_total = 0.0;
    double pulling_plus_task = 0.0;
    double greedy_total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto cfg = config(Scheme::Parrot, 4, 60, 30, 4);
        cfg.seed = seed;
        cfg.scheduling = SchedulingMode::Uniform;
        const auto devices = make_device_models(4, {0.0, 0.5, 1.0}, false, 0.002, 0.05, 0.0);
        const auto u = run_fixture(testutil::Fixture(cfg, "fedavg", 6000, 0.2), devices);
        cfg.scheduling = SchedulingMode::TimeWindow;
        const auto g = run_fixture(testutil::Fixture(cfg, "fedavg", 6000, 0.2), devices);
        cfg.scheme = Scheme::FaDist;
        const auto f = run_fixture(testutil::Fixture(cfg, "fedavg", 6000, 0.2), devices);
        for (std::size_t r = 2; r < u.size(); ++r) {
            double longest = 0.0;
            for (const auto& t : f[r].timings) longest = std::max(longest, t.reported_seconds);
            uniform_total += u[r].simulated_round_seconds;
            pulling_total += f[r].simulated_round_seconds;
            pulling_plus_task += f[r].simulated_round_seconds + longest;
            greedy_total += g[r].simulated_round_seconds;
        }
    }
    EXPECT_LE(pulling_total, uniform_total);
    EXPECT_LE(greedy_total, pulling_plus_task);
}

TEST(Engine, DeviceFailureAbortsTheRound) {
    const auto cfg = config(Scheme::Parrot, 4);
    testutil::Fixture fx(cfg);
    const auto victim = select_clients(cfg, 0).selected.at(3);
    ExplodingPlugin plugin(victim);
    auto in = fx.inputs();
    in.plugin = &plugin;
    Simulation sim(std::move(in));
    try {
        sim.step();
        FAIL() << "expected DeviceFailure";
    } catch (const DeviceFailure& e) {
        EXPECT_GE(e.device_id(), 0);
        EXPECT_NE(std::string(e.what()).find("synthetic failure"), std::string::npos);
    }
}

TEST(Engine, StatefulPluginNeedsStateDir) {
    const testutil::Fixture fx(config(Scheme::Parrot, 4), "scaffold");
    EXPECT_THROW(Simulation(fx.inputs()), ConfigError);
}

TEST(Engine, ReopeningTheStoreMidRunChangesNothing) {
    auto cfg = config(Scheme::Parrot, 3, 30, 10, 8);
    const testutil::Fixture fx(cfg, "scaffold");
    testutil::TempDir a("engine_a");
    testutil::TempDir b("engine_b");
    const auto straight = run(fx.inputs({}, a.path()));
    Simulation sim(fx.inputs({}, b.path()));
    std::vector<RoundOutcome> resumed;
    while (!sim.done()) {
        if (sim.next_round() == 4) sim.reopen_state_store();
        resumed.push_back(sim.step());
    }
    ASSERT_EQ(resumed.size(), straight.size());
    for (std::size_t r = 0; r < straight.size(); ++r) EXPECT_EQ(resumed[r].new_global, straight[r].new_global);
    EXPECT_GT(straight.back().ledger.state_bytes_disk, 0);
    EXPECT_LE(straight.back().ledger.peak_live_state_entries, 3);
}

TEST(Engine, RoundRowsHaveAllColumns) {
    const auto cfg = config(Scheme::FaDist, 4, 40, 20, 2);
    const auto out = run_fixture(testutil::Fixture(cfg));
    std::ostringstream header;
    write_round_header(header);
    std::ostringstream row;
    write_round(row, cfg, out[1]);
    const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), '\t'); };
    EXPECT_EQ(count(header.str()), count(row.str()));
    EXPECT_NE(row.str().find("fa-dist"), std::string::npos);
}
