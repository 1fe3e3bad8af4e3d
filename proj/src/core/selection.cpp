#include <parrot/selection.hpp>

#include <parrot/errors.hpp>
#include <parrot/rng.hpp>

#include <algorithm>
#include <numeric>

namespace parrot {

ClientSelection UniformSampler::select(const SimConfig& cfg, int round) const {
    if (round < 0 || round >= cfg.total_rounds) {
        throw ConfigError("select_clients: round " + std::to_string(round) + " outside [0, " +
                          std::to_string(cfg.total_rounds) + ")");
    }
    const int m = cfg.total_clients;
    const int mp = cfg.concurrent_clients;
    if (mp < 1 || mp > m) {
        throw ConfigError("select_clients: need 1 <= concurrent_clients <= total_clients, got " +
                          std::to_string(mp) + " of " + std::to_string(m));
    }

    // Partial Fisher-Yates: the first mp slots are a uniform sample.
    std::vector<int> ids(static_cast<std::size_t>(m));
    std::iota(ids.begin(), ids.end(), 0);
    auto rng = make_rng(cfg.seed, stream::kSelection, {static_cast<std::uint64_t>(round)});
    for (int i = 0; i < mp; ++i) {
        std::uniform_int_distribution<int> pick(i, m - 1);
        std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
    }
    ids.resize(static_cast<std::size_t>(mp));
    std::sort(ids.begin(), ids.end());
    return ClientSelection{round, std::move(ids)};
}

ClientSelection select_clients(const SimConfig& cfg, int round) {
    return UniformSampler{}.select(cfg, round);
}

}  // namespace parrot
