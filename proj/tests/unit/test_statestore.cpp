#include <parrot/errors.hpp>
#include <parrot/state_store.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <thread>

using namespace parrot;

namespace {

using Payload = std::map<std::string, Tensor, std::less<>>;

Payload random_payload(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1e3);
    Payload p;
    const int n = 1 + static_cast<int>(seed % 3);
    for (int i = 0; i < n; ++i) {
        const std::int64_t rows = 1 + static_cast<std::int64_t>(rng() % 4);
        const std::int64_t cols = 1 + static_cast<std::int64_t>(rng() % 5);
        std::vector<double> values(static_cast<std::size_t>(rows * cols));
        for (auto& v : values) v = normal(rng);
        p["entry" + std::to_string(i)] = Tensor({rows, cols}, values);
    }
    p["scalar"] = Tensor({1}, {-0.0});
    return p;
}

StateStore::DefaultFactory zero_factory() {
    return [](int id) {
        ClientState s;
        s.client_id = id;
        s.payload["c"] = Tensor::zeros({2});
        return s;
    };
}

bool bitwise_equal(const Payload& a, const Payload& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [k, t] : a) {
        const auto it = b.find(k);
        if (it == b.end() || it->second.shape != t.shape || it->second.data.size() != t.data.size()) return false;
        if (std::memcmp(t.data.data(), it->second.data.data(), t.data.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

}  // namespace

TEST(StateStore, UnseenClientGetsDefault) {
    testutil::TempDir dir;
    StateStore store(dir.path(), zero_factory());
    const auto s = store.load_state(17);
    EXPECT_EQ(s.client_id, 17);
    EXPECT_EQ(s.round_written, -1);
    EXPECT_EQ(s.payload.at("c").data, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(store.round_written(17), -1);
    EXPECT_FALSE(std::filesystem::exists(store.record_path(17)));
}

TEST(StateStore, RoundTripIsBitwise) {
    testutil::TempDir dir;
    StateStore store(dir.path(), zero_factory());
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const int id = static_cast<int>(seed);
        auto p = random_payload(seed);
        p["special"] = Tensor({3}, {std::numeric_limits<double>::denorm_min(), -1e308, 1.0 / 3.0});
        store.save_state(id, 4, p);
        const auto back = store.load_state(id);
        EXPECT_EQ(back.client_id, id);
        EXPECT_EQ(back.round_written, 4);
        EXPECT_TRUE(bitwise_equal(back.payload, p)) << "seed " << seed;
        store.release(id);
    }
}

TEST(StateStore, LatestRoundWinsAndStaleWritesFail) {
    testutil::TempDir dir;
    StateStore store(dir.path());
    store.save_state(3, 1, random_payload(1));
    store.save_state(3, 5, random_payload(2));
    EXPECT_TRUE(bitwise_equal(store.load_state(3).payload, random_payload(2)));
    EXPECT_EQ(store.round_written(3), 5);
    EXPECT_THROW(store.save_state(3, 5, random_payload(3)), StaleWrite);
    EXPECT_THROW(store.save_state(3, 2, random_payload(3)), StaleWrite);
    EXPECT_TRUE(bitwise_equal(store.load_state(3).payload, random_payload(2)));
}

TEST(StateStore, FlippedByteIsCorrupt) {
    testutil::TempDir dir;
    StateStore store(dir.path());
    store.save_state(8, 0, random_payload(4));
    const auto path = store.record_path(8);
    const auto size = std::filesystem::file_size(path);
    for (std::uint64_t offset : {std::uint64_t{0}, std::uint64_t{40}, size - 1}) {
        auto bytes = testutil::read_file(path);
        const auto original = bytes;
        bytes[offset] = static_cast<char>(bytes[offset] ^ 0x10);
        std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
        EXPECT_THROW(store.load_state(8), CorruptRecord) << "offset " << offset;
        std::ofstream(path, std::ios::binary | std::ios::trunc) << original;
    }
    EXPECT_NO_THROW(store.load_state(8));
}

TEST(StateStore, TruncatedRecordIsCorrupt) {
    const auto bytes = StateStore::encode_record(1, 2, random_payload(5));
    EXPECT_THROW(StateStore::decode_record(std::span(bytes).first(bytes.size() - 3)), CorruptRecord);
    EXPECT_THROW(StateStore::decode_record(std::span(bytes).first(10)), CorruptRecord);
}

TEST(StateStore, HeaderLayout) {
    const auto payload = random_payload(6);
    const auto bytes = StateStore::encode_record(258, 7, payload);
    ASSERT_GE(bytes.size(), StateStore::kHeaderSize);
    EXPECT_EQ(std::memcmp(bytes.data(), "PSTA", 4), 0);
    auto read_u64 = [&](std::size_t off) {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(bytes[off + static_cast<std::size_t>(i)]);
        return v;
    };
    EXPECT_EQ(static_cast<std::uint8_t>(bytes[4]), 1);
    EXPECT_EQ(read_u64(8), 258u);
    EXPECT_EQ(read_u64(16), 7u);
    EXPECT_EQ(read_u64(24), bytes.size() - StateStore::kHeaderSize);
    const auto back = StateStore::decode_record(bytes);
    EXPECT_EQ(back.client_id, 258);
    EXPECT_EQ(back.round_written, 7);
    EXPECT_TRUE(bitwise_equal(back.payload, payload));
}

TEST(StateStore, ReopenSeesPreviousRecords) {
    testutil::TempDir dir;
    {
        StateStore store(dir.path());
        store.save_state(1, 0, random_payload(7));
        store.save_state(2, 3, random_payload(8));
    }
    std::ofstream(dir / "client_1.state.tmp") << "partial";
    StateStore reopened(dir.path());
    EXPECT_EQ(reopened.round_written(1), 0);
    EXPECT_EQ(reopened.round_written(2), 3);
    EXPECT_EQ(reopened.stats().records, 2);
    EXPECT_TRUE(bitwise_equal(reopened.load_state(2).payload, random_payload(8)));
    for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
        EXPECT_EQ(e.path().filename().string().find(".tmp"), std::string::npos) << e.path();
    }
}

TEST(StateStore, LiveEntryAccounting) {
    testutil::TempDir dir;
    StateStore store(dir.path(), zero_factory());
    store.load_state(1);
    store.load_state(2);
    store.load_state(3);
    EXPECT_EQ(store.stats().live_cache_entries, 3);
    store.save_state(1, 0, random_payload(1));
    store.release(2);
    EXPECT_EQ(store.stats().live_cache_entries, 1);
    EXPECT_EQ(store.stats().peak_live_cache_entries, 3);
    store.reset_peak();
    EXPECT_EQ(store.stats().peak_live_cache_entries, 1);
    store.release(3);
    EXPECT_EQ(store.stats().live_cache_entries, 0);
    EXPECT_EQ(store.stats().bytes_on_disk, std::filesystem::file_size(store.record_path(1)));
}

TEST(StateStore, ConcurrentSavesForDistinctClients) {
    testutil::TempDir dir;
    StateStore store(dir.path());
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (int round = 0; round < 10; ++round) {
                for (int c = t * 10; c < t * 10 + 10; ++c) {
                    store.load_state(c);
                    store.save_state(c, round, random_payload(static_cast<std::uint64_t>(c * 100 + round)));
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    for (int c = 0; c < 40; ++c) {
        const auto s = store.load_state(c);
        EXPECT_EQ(s.round_written, 9);
        EXPECT_TRUE(bitwise_equal(s.payload, random_payload(static_cast<std::uint64_t>(c * 100 + 9))));
    }
    EXPECT_EQ(store.stats().records, 40);
}
