#pragma once

#include <parrot/data.hpp>
#include <parrot/engine.hpp>
#include <parrot/model.hpp>
#include <parrot/plugin.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "parrot") {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline double max_rel_diff(const parrot::Tensor& a, const parrot::Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double scale = std::max({std::abs(a.data[i]), std::abs(b.data[i]), 1e-300});
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / scale);
    }
    return worst;
}

// Largest relative difference over the tensors both bundles share, scaled
// per tensor by its largest magnitude.
inline double bundle_rel_diff(const parrot::ParamBundle& a, const parrot::ParamBundle& b) {
    double worst = 0.0;
    for (const auto& [name, e] : a.entries()) {
        const auto& x = e.tensor.data;
        const auto& y = b.tensor(name).data;
        double scale = 1e-300;
        for (std::size_t i = 0; i < x.size(); ++i) scale = std::max({scale, std::abs(x[i]), std::abs(y[i])});
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]) / scale);
    }
    return worst;
}

// A small self-contained simulation setup.
struct Fixture {
    parrot::SimConfig cfg;
    parrot::SyntheticDataset train;
    parrot::SyntheticDataset holdout;
    std::vector<parrot::ClientProfile> profiles;
    std::unique_ptr<parrot::AlgorithmPlugin> plugin;
    parrot::ParamBundle initial;

    Fixture(parrot::SimConfig c, const std::string& algorithm = "fedavg", std::int64_t samples = 4000,
            std::optional<double> quantity_skew = 0.5)
        : cfg(c) {
        train = parrot::generate(samples, parrot::GeneratorParams{6, 3, 1.5, 1.0}, cfg.seed);
        holdout = parrot::sample_like(train, 500, cfg.seed);
        parrot::PartitionSpec ps;
        ps.quantity_skew = quantity_skew;
        profiles = parrot::partition(train, cfg.total_clients, ps, cfg.seed);
        parrot::PluginConfig pc;
        pc.name = algorithm;
        plugin = parrot::make_plugin(pc);
        initial = plugin->initial_global(parrot::ModelParams::random(3, 6, 0.1, cfg.seed));
    }

    parrot::SimulationInputs inputs(std::vector<parrot::DeviceModel> devices = {},
                                    const std::filesystem::path& state_dir = {}) const {
        parrot::SimulationInputs in;
        in.cfg = cfg;
        in.plugin = plugin.get();
        in.train = &train;
        in.holdout = &holdout;
        in.profiles = profiles;
        in.devices = devices.empty() ? parrot::make_device_models(cfg.num_devices, {0.0, 0.5, 1.0}, false,
                                                                  0.002, 0.05, 0.0)
                                     : std::move(devices);
        in.initial_global = initial;
        in.state_dir = state_dir;
        return in;
    }
};

}  // namespace testutil
