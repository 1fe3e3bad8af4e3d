#pragma once

#include <parrot/bundle.hpp>
#include <parrot/plugin.hpp>
#include <parrot/wire.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace parrot {

// Running fold of one entry on a device.
//   WeightedAverage: sum = sum(w_i x_i), weight = sum(w_i)
//   Sum:             sum = sum(x_i)
//   SimpleAverage:   sum = sum(x_i), count
//   Collect:         collected = [(client, x_i)] in fold order
struct FoldedEntry {
    AggOp op = AggOp::WeightedAverage;
    std::vector<std::int64_t> shape;
    Tensor sum;
    double weight = 0.0;
    std::int64_t count = 0;
    std::vector<CollectedTensor> collected;

    bool operator==(const FoldedEntry&) const = default;
};

// What a device sends upstream once per round. Devices ship sums and
// weights rather than finished averages, so any grouping of clients into
// devices reduces to the same global result up to reassociation.
struct DevicePartial {
    int device_id = -1;
    std::map<std::string, FoldedEntry, std::less<>> entries;
    std::vector<int> clients_folded;

    bool empty() const noexcept { return clients_folded.empty(); }
    // Tensor payload bytes by role, as they cross the wire.
    std::size_t averaged_bytes() const noexcept;
    std::size_t collected_bytes() const noexcept;

    bool operator==(const DevicePartial&) const = default;
};

// Folds one client result into `partial`, in place. Accumulation order is
// call order. Throws ShapeMismatch / OpMismatch.
void local_fold(DevicePartial& partial, const ParamBundle& result, int client_id);

// Combines device partials (empty ones are skipped) in the given order and
// finalizes each entry. Throws EmptyInput when no partial folded a client,
// SchemaMismatch when non-empty partials disagree on averaged entries.
AggregateResult global_fold(std::span<const DevicePartial> partials);

// Dispatches to the plugin's server rule.
ParamBundle server_update(const AlgorithmPlugin& plugin, const ParamBundle& old_global,
                          const AggregateResult& aggregated, const ServerContext& ctx);

void encode_partial(wire::Writer& w, const DevicePartial& p);
DevicePartial decode_partial(wire::Reader& r);

}  // namespace parrot
