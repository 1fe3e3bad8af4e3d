#include <parrot/data.hpp>
#include <parrot/errors.hpp>
#include <parrot/model.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace parrot;

namespace {

double coefficient_of_variation(const std::vector<std::int64_t>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (auto x : v) var += (static_cast<double>(x) - mean) * (static_cast<double>(x) - mean);
    return std::sqrt(var / n) / mean;
}

void expect_set_partition(const std::vector<ClientProfile>& clients, std::int64_t n, std::int64_t floor) {
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const auto& c = clients[i];
        EXPECT_EQ(c.client_id, static_cast<int>(i));
        EXPECT_EQ(c.sample_count, static_cast<std::int64_t>(c.sample_indices.size()));
        EXPECT_GE(c.sample_count, floor);
        all.insert(all.end(), c.sample_indices.begin(), c.sample_indices.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(static_cast<std::size_t>(n));
    std::iota(expected.begin(), expected.end(), 0);
    EXPECT_EQ(all, expected);
}

}  // namespace

TEST(Generate, ShapeContract) {
    const auto ds = generate(100, 2, 2, 1);
    EXPECT_EQ(ds.n_samples, 100);
    EXPECT_EQ(ds.features.size(), 200u);
    ASSERT_EQ(ds.labels.size(), 100u);
    for (int y : ds.labels) {
        EXPECT_TRUE(y == 0 || y == 1);
    }
    for (double x : ds.features) {
        EXPECT_TRUE(std::isfinite(x));
    }
}

TEST(Generate, Deterministic) {
    const auto a = generate(300, 5, 3, 42);
    const auto b = generate(300, 5, 3, 42);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(generate(300, 5, 3, 43).features, a.features);
}

TEST(Generate, EveryClassPresent) {
    const auto ds = generate(7, 3, 7, 5);
    std::set<int> seen(ds.labels.begin(), ds.labels.end());
    EXPECT_EQ(seen.size(), 7u);
}

TEST(Generate, HoldoutSharesTheMixture) {
    const auto ds = generate(500, 4, 3, 8);
    const auto hold = sample_like(ds, 200, 8);
    EXPECT_EQ(hold.class_means, ds.class_means);
    EXPECT_EQ(hold.n_samples, 200);
    EXPECT_NE(std::vector<double>(hold.features.begin(), hold.features.begin() + 4),
              std::vector<double>(ds.features.begin(), ds.features.begin() + 4));
}

TEST(Generate, CentralizedLogisticRegressionIsAccurate) {
    const auto ds = generate(2000, GeneratorParams{10, 4, 3.0, 1.0}, 1);
    auto model = ModelParams::zeros(4, 10);
    std::vector<std::size_t> all(2000);
    std::iota(all.begin(), all.end(), 0);
    for (int step = 0; step < 200; ++step) {
        ModelParams grad;
        loss_and_gradient(model, ds, all, &grad);
        model.axpy(-0.5, grad);
    }
    const auto eval = evaluate(model, ds);
    // Value observed with this seed: recorded in the fixture, threshold from the contract.
    EXPECT_GE(eval.accuracy, 0.90);
}

TEST(Partition, UniformSizesWhenDivisible) {
    const auto sizes = partition_sizes(1000, 10, PartitionSpec{}, 3);
    EXPECT_EQ(sizes, std::vector<std::int64_t>(10, 100));
    const auto uneven = partition_sizes(1003, 10, PartitionSpec{}, 3);
    EXPECT_EQ(std::accumulate(uneven.begin(), uneven.end(), std::int64_t{0}), 1003);
    EXPECT_EQ(*std::max_element(uneven.begin(), uneven.end()) - *std::min_element(uneven.begin(), uneven.end()), 1);
}

TEST(Partition, InfeasibleWhenTooFewSamples) {
    PartitionSpec spec;
    spec.min_samples_per_client = 5;
    EXPECT_THROW(partition_sizes(49, 10, spec, 1), InfeasiblePartition);
    EXPECT_NO_THROW(partition_sizes(50, 10, spec, 1));
}

TEST(Partition, HeavyQuantitySkew) {
    PartitionSpec spec;
    spec.quantity_skew = 0.1;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto sizes = partition_sizes(10000, 100, spec, seed);
        EXPECT_GT(coefficient_of_variation(sizes), 0.5) << "seed " << seed;
    }
}

TEST(Partition, LargeConcentrationIsNearlyUniform) {
    PartitionSpec spec;
    spec.quantity_skew = 1000.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto sizes = partition_sizes(10000, 20, spec, seed);
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        EXPECT_LT(static_cast<double>(*hi) / static_cast<double>(*lo), 1.2) << "seed " << seed;
    }
}

TEST(Partition, FloorTakesFromLargestAndKeepsTotal) {
    PartitionSpec spec;
    spec.quantity_skew = 0.05;
    spec.min_samples_per_client = 20;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto sizes = partition_sizes(3000, 50, spec, seed);
        EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0}), 3000);
        EXPECT_GE(*std::min_element(sizes.begin(), sizes.end()), 20);
    }
}

TEST(Partition, IsASetPartitionForEverySpec) {
    const auto ds = generate(3000, 4, 5, 11);
    std::vector<PartitionSpec> specs(4);
    specs[1].quantity_skew = 0.3;
    specs[2].label_skew = 0.1;
    specs[3].label_skew = 1.0;
    specs[3].quantity_skew = 0.5;
    specs[3].min_samples_per_client = 10;
    for (const auto& spec : specs) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto clients = partition(ds, 37, spec, seed);
            expect_set_partition(clients, 3000, spec.min_samples_per_client);
        }
    }
}

TEST(Partition, LabelSkewConcentratesClasses) {
    const auto ds = generate(10000, 4, 10, 2);
    auto dominant_share = [&](const PartitionSpec& spec) {
        const auto clients = partition(ds, 50, spec, 2);
        double total = 0.0;
        for (const auto& c : clients) {
            std::vector<int> counts(10, 0);
            for (auto i : c.sample_indices) ++counts[static_cast<std::size_t>(ds.labels[i])];
            total += static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
                     static_cast<double>(c.sample_count);
        }
        return total / 50.0;
    };
    PartitionSpec skewed;
    skewed.label_skew = 0.1;
    EXPECT_GT(dominant_share(skewed), 0.6);
    EXPECT_LT(dominant_share(PartitionSpec{}), 0.3);
}

TEST(Partition, ExportWritesOneRowPerSample) {
    testutil::TempDir dir;
    const auto ds = generate(200, 2, 2, 4);
    const auto clients = partition(ds, 7, PartitionSpec{}, 4);
    export_partitions(clients, dir / "parts.tsv");
    const auto text = testutil::read_file(dir / "parts.tsv");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 201);
}
