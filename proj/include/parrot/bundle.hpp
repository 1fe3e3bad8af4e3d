#pragma once

#include <parrot/tensor.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace parrot {

// How the server combines an entry across clients.
enum class AggOp : std::uint8_t {
    WeightedAverage = 0,  // sum(w_i x_i) / sum(w_i)
    Sum = 1,              // sum(x_i), weight ignored
    SimpleAverage = 2,    // sum(x_i) / count
    Collect = 3,          // kept per client, never averaged
};

std::string_view to_string(AggOp op) noexcept;

struct BundleEntry {
    Tensor tensor;
    AggOp op = AggOp::WeightedAverage;
    double weight = 1.0;
    int origin_client = -1;  // required for Collect

    bool operator==(const BundleEntry&) const = default;
};

// Named tensors exchanged between server and clients: the global payload,
// a client's result, or a finalized aggregate. Iteration order is by name.
class ParamBundle {
public:
    void set(const std::string& name, Tensor tensor, AggOp op = AggOp::WeightedAverage,
             double weight = 1.0, int origin_client = -1);

    bool contains(std::string_view name) const;
    // Throws MissingEntry.
    const BundleEntry& at(std::string_view name) const;
    const Tensor& tensor(std::string_view name) const { return at(name).tensor; }

    const std::map<std::string, BundleEntry, std::less<>>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    // Checks the per-op weight/origin rules.
    void validate() const;

    // Tensor payload bytes by role (AVG. Params. vs Special Params.).
    std::size_t averaged_bytes() const noexcept;
    std::size_t collected_bytes() const noexcept;

    bool operator==(const ParamBundle&) const = default;

private:
    std::map<std::string, BundleEntry, std::less<>> entries_;
};

struct CollectedTensor {
    int client_id = -1;
    Tensor tensor;

    bool operator==(const CollectedTensor&) const = default;
};

// Output of the global fold: finalized averaging entries plus the untouched
// per-client Collect entries, keyed by entry name.
struct AggregateResult {
    ParamBundle averaged;
    std::map<std::string, std::vector<CollectedTensor>, std::less<>> collected;
    std::int64_t clients = 0;
};

}  // namespace parrot
