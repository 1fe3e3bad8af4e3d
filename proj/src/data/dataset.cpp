#include <parrot/data.hpp>

#include <parrot/errors.hpp>
#include <parrot/rng.hpp>

#include <algorithm>
#include <numeric>

namespace parrot {

namespace {

void fill_samples(SyntheticDataset& ds, std::int64_t n_samples, Rng& rng) {
    const auto f = static_cast<std::size_t>(ds.params.n_features);
    const int c = ds.params.n_classes;
    ds.n_samples = n_samples;
    ds.labels.resize(static_cast<std::size_t>(n_samples));
    for (std::int64_t i = 0; i < n_samples; ++i) {
        ds.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % c);
    }
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);

    std::normal_distribution<double> noise(0.0, ds.params.noise);
    ds.features.resize(static_cast<std::size_t>(n_samples) * f);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_samples); ++i) {
        const double* mean = ds.class_means.data() + static_cast<std::size_t>(ds.labels[i]) * f;
        for (std::size_t j = 0; j < f; ++j) {
            ds.features[i * f + j] = mean[j] + noise(rng);
        }
    }
}

}  // namespace

SyntheticDataset generate(std::int64_t n_samples, const GeneratorParams& params, std::uint64_t seed) {
    if (n_samples < 1 || params.n_features < 1 || params.n_classes < 1) {
        throw ConfigError("generate: n_samples, n_features and n_classes must be positive");
    }
    if (n_samples < params.n_classes) {
        throw ConfigError("generate: need at least one sample per class");
    }
    if (!(params.noise > 0.0) || !(params.separation >= 0.0)) {
        throw ConfigError("generate: noise must be positive and separation non-negative");
    }
    SyntheticDataset ds;
    ds.params = params;
    auto rng = make_rng(seed, stream::kDataset);
    std::normal_distribution<double> unit(0.0, 1.0);
    ds.class_means.resize(static_cast<std::size_t>(params.n_classes * params.n_features));
    for (double& m : ds.class_means) {
        m = params.separation * unit(rng);
    }
    fill_samples(ds, n_samples, rng);
    return ds;
}

SyntheticDataset sample_like(const SyntheticDataset& base, std::int64_t n_samples,
                             std::uint64_t seed) {
    if (n_samples < base.params.n_classes) {
        throw ConfigError("sample_like: need at least one sample per class");
    }
    SyntheticDataset ds;
    ds.params = base.params;
    ds.class_means = base.class_means;
    auto rng = make_rng(seed, stream::kHoldout);
    fill_samples(ds, n_samples, rng);
    return ds;
}

}  // namespace parrot
