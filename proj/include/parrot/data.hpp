#pragma once

#include <parrot/selection.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace parrot {

struct GeneratorParams {
    int n_features = 10;
    int n_classes = 4;
    double separation = 3.0;  // scale of the class means
    double noise = 1.0;       // per-feature standard deviation around the mean
};

// Gaussian class-conditional mixture. Features are row-major n_samples x n_features.
struct SyntheticDataset {
    GeneratorParams params;
    std::int64_t n_samples = 0;
    std::vector<double> features;
    std::vector<int> labels;
    std::vector<double> class_means;  // n_classes x n_features

    const double* row(std::size_t i) const noexcept {
        return features.data() + i * static_cast<std::size_t>(params.n_features);
    }
};

// Draws class means from `seed`, then n_samples points with balanced labels.
SyntheticDataset generate(std::int64_t n_samples, const GeneratorParams& params, std::uint64_t seed);

inline SyntheticDataset generate(std::int64_t n_samples, int n_features, int n_classes,
                                 std::uint64_t seed) {
    return generate(n_samples, GeneratorParams{n_features, n_classes, 3.0, 1.0}, seed);
}

// Fresh samples from the same mixture (same class means) as `base`.
SyntheticDataset sample_like(const SyntheticDataset& base, std::int64_t n_samples,
                             std::uint64_t seed);

struct PartitionSpec {
    std::optional<double> label_skew;     // Dirichlet alpha; nullopt = iid
    std::optional<double> quantity_skew;  // Dirichlet alpha; nullopt = uniform sizes
    std::int64_t min_samples_per_client = 1;
};

// Disjoint cover of the sample indices by M clients.
std::vector<ClientProfile> partition(const SyntheticDataset& ds, int num_clients,
                                     const PartitionSpec& spec, std::uint64_t seed);

// Per-client sizes only (the quantity-skew step of partition()).
std::vector<std::int64_t> partition_sizes(std::int64_t n_samples, int num_clients,
                                          const PartitionSpec& spec, std::uint64_t seed);

// Tab-separated (client_id, sample_index) rows.
void export_partitions(const std::vector<ClientProfile>& clients, const std::filesystem::path& path);

}  // namespace parrot
