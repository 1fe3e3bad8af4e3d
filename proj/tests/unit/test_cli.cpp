#include <parrot/errors.hpp>
#include <parrot/experiment.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sstream>

using namespace parrot;
using nlohmann::json;

namespace {

json small_spec() {
    return json::parse(R"({
      "sim": {"total_clients": 30, "concurrent_clients": 12, "num_devices": 3, "total_rounds": 5,
              "seed": 3, "scheme": "parrot", "scheduling": "time-window", "time_window": 3},
      "data": {"samples": 3000, "holdout": 300, "features": 5, "classes": 3, "quantity_skew": 0.5},
      "algorithm": {"name": "fedavg"},
      "devices": {"hetero_ratios": [0.0, 1.0], "noise": 0.02}
    })");
}

// Drops the given tab-separated columns (by header name) from every line.
std::string without_columns(const std::string& tsv, const std::vector<std::string>& names) {
    std::istringstream in(tsv);
    std::string line;
    std::vector<bool> keep;
    std::string out;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, '\t')) cells.push_back(cell);
        if (keep.empty()) {
            for (const auto& c : cells) keep.push_back(std::find(names.begin(), names.end(), c) == names.end());
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i < keep.size() && keep[i]) out += cells[i] + '\t';
        }
        out += '\n';
    }
    return out;
}

}  // namespace

TEST(Spec, ParsesAndRoundTrips) {
    const auto spec = experiment_from_json(small_spec());
    EXPECT_EQ(spec.sim.total_clients, 30);
    EXPECT_EQ(spec.data.generator.n_features, 5);
    EXPECT_EQ(spec.devices.hetero_ratios, (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(spec.data.partition.quantity_skew, 0.5);
    EXPECT_FALSE(spec.data.partition.label_skew.has_value());
    const auto again = experiment_from_json(experiment_to_json(spec));
    EXPECT_EQ(experiment_to_json(again), experiment_to_json(spec));
}

TEST(Spec, RejectsUnknownKeysAndBadValues) {
    auto j = small_spec();
    j["data"]["sampels"] = 10;
    EXPECT_THROW(experiment_from_json(j), ConfigError);
    j = small_spec();
    j["extra"] = json::object();
    EXPECT_THROW(experiment_from_json(j), ConfigError);
    j = small_spec();
    j["sim"]["num_devices"] = 50;
    EXPECT_THROW(experiment_from_json(j), ConfigError);
    j = small_spec();
    j.erase("sim");
    EXPECT_THROW(experiment_from_json(j), ConfigError);
    j = small_spec();
    j["algorithm"]["name"] = "nope";
    EXPECT_THROW(experiment_from_json(j), ConfigError);
}

TEST(Spec, LoadsShippedConfigs) {
    for (const auto* name : {"quick.json", "sweep_devices.json", "scaffold.json"}) {
        EXPECT_NO_THROW(load_experiment(std::filesystem::path(PARROT_SOURCE_DIR) / "configs" / name)) << name;
    }
    EXPECT_THROW(load_experiment("/nonexistent/spec.json"), ConfigError);
}

TEST(Run, WritesEveryOutput) {
    testutil::TempDir dir;
    const auto res = run_experiment(experiment_from_json(small_spec()), dir.path());
    for (const auto* f : {"spec.json", "rounds.tsv", "timings.tsv", "plans.tsv", "summary.json", "summary.txt"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    }
    EXPECT_EQ(res.rounds.size(), 5u);
    const auto rounds = testutil::read_file(dir / "rounds.tsv");
    EXPECT_EQ(std::count(rounds.begin(), rounds.end(), '\n'), 6);
    const auto summary = json::parse(testutil::read_file(dir / "summary.json"));
    EXPECT_EQ(summary.at("arm").at("num_devices"), 3);
    EXPECT_EQ(summary.at("total_trips"), 2 * 3 * 5);
    EXPECT_TRUE(summary.at("cost_mismatches").empty());
    // The spec written out reproduces the run's configuration.
    const auto echoed = experiment_from_json(json::parse(testutil::read_file(dir / "spec.json")));
    EXPECT_EQ(experiment_to_json(echoed), experiment_to_json(experiment_from_json(small_spec())));
}

TEST(Run, VirtualClockIsByteReproducible) {
    testutil::TempDir a("repro_a");
    testutil::TempDir b("repro_b");
    const auto spec = experiment_from_json(small_spec());
    run_experiment(spec, a.path());
    run_experiment(spec, b.path());
    for (const auto* f : {"timings.tsv", "plans.tsv", "spec.json"}) {
        EXPECT_EQ(testutil::read_file(a / f), testutil::read_file(b / f)) << f;
    }
    EXPECT_EQ(without_columns(testutil::read_file(a / "rounds.tsv"), {"wall_seconds"}),
              without_columns(testutil::read_file(b / "rounds.tsv"), {"wall_seconds"}));
    auto sa = json::parse(testutil::read_file(a / "summary.json"));
    auto sb = json::parse(testutil::read_file(b / "summary.json"));
    sa.erase("mean_wall_seconds");
    sb.erase("mean_wall_seconds");
    EXPECT_EQ(sa, sb);
}

TEST(Sweep, ExpandsTheProduct) {
    auto j = small_spec();
    j["sweep"] = json::parse(R"({"scheme": ["sp", "sd-dist", "parrot"], "num_devices": [2, 3]})");
    const auto arms = expand_sweep(experiment_from_json(j));
    // sp and sd-dist collapse to a single device count each.
    ASSERT_EQ(arms.size(), 4u);
    for (const auto& arm : arms) {
        if (arm.spec.sim.scheme == Scheme::Sp) EXPECT_EQ(arm.spec.sim.num_devices, 1);
        if (arm.spec.sim.scheme == Scheme::SdDist) EXPECT_EQ(arm.spec.sim.num_devices, 12);
        EXPECT_EQ(arm.spec.sim.seed, 3u);
    }
    EXPECT_NE(arms[2].name, arms[3].name);
}

TEST(Sweep, MoreDevicesNeverSlowTheRound) {
    testutil::TempDir dir;
    auto j = small_spec();
    j["sim"]["total_clients"] = 64;
    j["sim"]["concurrent_clients"] = 32;
    j["sim"]["total_rounds"] = 6;
    j["data"]["samples"] = 6400;
    j["devices"]["hetero_ratios"] = json::array({0.0});
    j["devices"]["noise"] = 0.0;
    j["sweep"] = json::parse(R"({"num_devices": [1, 2, 4, 8]})");
    run_sweep(experiment_from_json(j), dir.path());
    EXPECT_TRUE(std::filesystem::exists(dir / "sweep_summary.tsv"));
    std::vector<double> means;
    for (const auto& arm : expand_sweep(experiment_from_json(j))) {
        const auto s = json::parse(testutil::read_file(dir.path() / arm.name / "summary.json"));
        means.push_back(s.at("mean_round_seconds").get<double>());
    }
    ASSERT_EQ(means.size(), 4u);
    for (std::size_t i = 1; i < means.size(); ++i) EXPECT_LE(means[i], means[i - 1]);
}

TEST(Report, EmptyDirectory) {
    testutil::TempDir dir;
    EXPECT_EQ(report_directory(dir.path()), "no results in '" + dir.path().string() + "'\n");
}

TEST(Report, PairsScheduledWithUniformArms) {
    testutil::TempDir dir;
    auto j = small_spec();
    j["sweep"] = json::parse(R"({"scheduling": ["none-uniform", "time-window"]})");
    run_sweep(experiment_from_json(j), dir.path());
    const auto text = report_directory(dir.path());
    for (const auto* section : {"## round time vs devices", "## estimation error vs round",
                                "## scheduled vs uniform makespan", "## communication vs cost model"}) {
        EXPECT_NE(text.find(section), std::string::npos) << section;
    }
    EXPECT_NE(text.find("time-window"), std::string::npos);
    EXPECT_EQ(text.find("no pairs"), std::string::npos);
}
