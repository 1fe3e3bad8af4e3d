#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace parrot {

using Rng = std::mt19937_64;

// Stream labels. Every subsystem draws from its own stream so that adding
// draws in one place never shifts another subsystem's sequence.
namespace stream {
inline constexpr std::string_view kSelection = "selection";
inline constexpr std::string_view kDataset = "dataset";
inline constexpr std::string_view kHoldout = "holdout";
inline constexpr std::string_view kPartition = "partition";
inline constexpr std::string_view kModelInit = "model-init";
inline constexpr std::string_view kMinibatch = "minibatch";
inline constexpr std::string_view kTimingNoise = "timing-noise";
inline constexpr std::string_view kRandomSchedule = "random-schedule";
}  // namespace stream

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Seed for the stream `label` at integer coordinates `coords` (round, client, ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::initializer_list<std::uint64_t> coords = {}) noexcept;

inline Rng make_rng(std::uint64_t root, std::string_view label,
                    std::initializer_list<std::uint64_t> coords = {}) {
    return Rng(derive_seed(root, label, coords));
}

}  // namespace parrot
