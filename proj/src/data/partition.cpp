#include <parrot/data.hpp>

#include <parrot/errors.hpp>
#include <parrot/rng.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>

namespace parrot {

namespace {

std::vector<double> dirichlet(Rng& rng, double alpha, std::size_t n) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<double> p(n);
    double total = 0.0;
    for (double& v : p) {
        v = gamma(rng);
        total += v;
    }
    if (!(total > 0.0)) {
        // Every draw underflowed (tiny alpha); treat as flat.
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
        return p;
    }
    for (double& v : p) {
        v /= total;
    }
    return p;
}

// Largest-remainder rounding of proportions to integer counts summing to `total`.
std::vector<std::int64_t> round_counts(const std::vector<double>& p, std::int64_t total) {
    std::vector<std::int64_t> counts(p.size());
    std::vector<double> frac(p.size());
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double raw = p[i] * static_cast<double>(total);
        counts[i] = static_cast<std::int64_t>(std::floor(raw));
        frac[i] = raw - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
        ++counts[order[k]];
        ++assigned;
    }
    return counts;
}

// Raises every client to `floor`, taking the deficit one sample at a time
// from the currently largest client (lowest id on ties).
void apply_floor(std::vector<std::int64_t>& sizes, std::int64_t floor) {
    std::int64_t deficit = 0;
    for (auto& s : sizes) {
        if (s < floor) {
            deficit += floor - s;
            s = floor;
        }
    }
    if (deficit == 0) {
        return;
    }
    auto cmp = [&](std::size_t a, std::size_t b) {
        return sizes[a] != sizes[b] ? sizes[a] < sizes[b] : a > b;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> heap(cmp);
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        heap.push(i);
    }
    while (deficit > 0) {
        const auto i = heap.top();
        heap.pop();
        --sizes[i];
        --deficit;
        heap.push(i);
    }
}

}  // namespace

std::vector<std::int64_t> partition_sizes(std::int64_t n_samples, int num_clients,
                                          const PartitionSpec& spec, std::uint64_t seed) {
    if (num_clients < 1) {
        throw ConfigError("partition: number of clients must be positive");
    }
    if (spec.min_samples_per_client < 1) {
        throw ConfigError("partition: min_samples_per_client must be positive");
    }
    if (n_samples < static_cast<std::int64_t>(num_clients) * spec.min_samples_per_client) {
        throw InfeasiblePartition("partition: " + std::to_string(n_samples) + " samples cannot give " +
                                  std::to_string(num_clients) + " clients at least " +
                                  std::to_string(spec.min_samples_per_client) + " each");
    }
    const auto m = static_cast<std::size_t>(num_clients);
    std::vector<std::int64_t> sizes(m);
    if (!spec.quantity_skew) {
        const std::int64_t base = n_samples / num_clients;
        const std::int64_t extra = n_samples % num_clients;
        for (std::size_t i = 0; i < m; ++i) {
            sizes[i] = base + (static_cast<std::int64_t>(i) < extra ? 1 : 0);
        }
        return sizes;
    }
    if (!(*spec.quantity_skew > 0.0)) {
        throw ConfigError("partition: quantity_skew must be positive");
    }
    auto rng = make_rng(seed, stream::kPartition, {0});
    sizes = round_counts(dirichlet(rng, *spec.quantity_skew, m), n_samples);
    apply_floor(sizes, spec.min_samples_per_client);
    return sizes;
}

std::vector<ClientProfile> partition(const SyntheticDataset& ds, int num_clients,
                                     const PartitionSpec& spec, std::uint64_t seed) {
    const auto sizes = partition_sizes(ds.n_samples, num_clients, spec, seed);
    const auto m = static_cast<std::size_t>(num_clients);
    std::vector<ClientProfile> clients(m);
    for (std::size_t i = 0; i < m; ++i) {
        clients[i].client_id = static_cast<int>(i);
        clients[i].sample_count = sizes[i];
        clients[i].sample_indices.reserve(static_cast<std::size_t>(sizes[i]));
    }

    auto rng = make_rng(seed, stream::kPartition, {1});
    if (!spec.label_skew) {
        std::vector<std::size_t> idx(static_cast<std::size_t>(ds.n_samples));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < m; ++i) {
            auto& out = clients[i].sample_indices;
            out.assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                       idx.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(sizes[i])));
            pos += static_cast<std::size_t>(sizes[i]);
            std::sort(out.begin(), out.end());
        }
        return clients;
    }

    if (!(*spec.label_skew > 0.0)) {
        throw ConfigError("partition: label_skew must be positive");
    }
    const auto c = static_cast<std::size_t>(ds.params.n_classes);
    std::vector<std::vector<std::size_t>> pools(c);
    for (std::size_t i = 0; i < static_cast<std::size_t>(ds.n_samples); ++i) {
        pools[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    }
    for (auto& pool : pools) {
        std::shuffle(pool.begin(), pool.end(), rng);
    }

    // Each client fills its quota slot by slot from its own class mixture,
    // renormalised over the classes that still have samples left.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> w(c);
    for (std::size_t i = 0; i < m; ++i) {
        const auto q = dirichlet(rng, *spec.label_skew, c);
        auto& out = clients[i].sample_indices;
        for (std::int64_t slot = 0; slot < sizes[i]; ++slot) {
            double total = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                w[k] = pools[k].empty() ? 0.0 : q[k];
                total += w[k];
            }
            if (!(total > 0.0)) {
                for (std::size_t k = 0; k < c; ++k) {
                    w[k] = static_cast<double>(pools[k].size());
                    total += w[k];
                }
            }
            double u = unif(rng) * total;
            std::size_t pick = c;
            for (std::size_t k = 0; k < c; ++k) {
                if (w[k] <= 0.0) {
                    continue;
                }
                pick = k;
                if (u < w[k]) {
                    break;
                }
                u -= w[k];
            }
            out.push_back(pools[pick].back());
            pools[pick].pop_back();
        }
        std::sort(out.begin(), out.end());
    }
    return clients;
}

void export_partitions(const std::vector<ClientProfile>& clients, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write partition file '" + path.string() + "'");
    }
    out << "client_id\tsample_index\n";
    for (const auto& c : clients) {
        for (auto idx : c.sample_indices) {
            out << c.client_id << '\t' << idx << '\n';
        }
    }
}

}  // namespace parrot
