#pragma once

#include <parrot/config.hpp>

#include <cstdint>
#include <memory>
#include <vector>

namespace parrot {

// One client's slice of the dataset. sample_count == sample_indices.size().
struct ClientProfile {
    int client_id = 0;
    std::int64_t sample_count = 0;
    std::vector<std::size_t> sample_indices;
};

struct ClientSelection {
    int round = 0;
    std::vector<int> selected;  // ascending, distinct
};

// Client sampler interface. Implementations must be deterministic in
// (cfg.seed, round) and must not keep mutable state.
class ClientSampler {
public:
    virtual ~ClientSampler() = default;
    virtual ClientSelection select(const SimConfig& cfg, int round) const = 0;
};

// Uniform sampling of M_p of M clients without replacement.
class UniformSampler final : public ClientSampler {
public:
    ClientSelection select(const SimConfig& cfg, int round) const override;
};

ClientSelection select_clients(const SimConfig& cfg, int round);

}  // namespace parrot
