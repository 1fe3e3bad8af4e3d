#include <parrot/bundle.hpp>

#include <parrot/errors.hpp>

#include <cmath>

namespace parrot {

std::string_view to_string(AggOp op) noexcept {
    switch (op) {
    case AggOp::WeightedAverage: return "weighted-average";
    case AggOp::Sum: return "sum";
    case AggOp::SimpleAverage: return "simple-average";
    case AggOp::Collect: return "collect";
    }
    return "?";
}

void ParamBundle::set(const std::string& name, Tensor tensor, AggOp op, double weight,
                      int origin_client) {
    entries_.insert_or_assign(name, BundleEntry{std::move(tensor), op, weight, origin_client});
}

bool ParamBundle::contains(std::string_view name) const {
    return entries_.find(name) != entries_.end();
}

const BundleEntry& ParamBundle::at(std::string_view name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw MissingEntry("bundle has no entry '" + std::string(name) + "'");
    }
    return it->second;
}

void ParamBundle::validate() const {
    for (const auto& [name, e] : entries_) {
        if (e.op == AggOp::WeightedAverage && !(e.weight > 0.0 && std::isfinite(e.weight))) {
            throw Error("entry '" + name + "': weighted-average requires a positive weight");
        }
        if (e.op == AggOp::Collect && e.origin_client < 0) {
            throw Error("entry '" + name + "': collect entries must carry the originating client");
        }
        if (e.tensor.numel() != shape_numel(e.tensor.shape)) {
            throw ShapeMismatch("entry '" + name + "': inconsistent shape");
        }
    }
}

std::size_t ParamBundle::averaged_bytes() const noexcept {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) {
        if (e.op != AggOp::Collect) {
            n += e.tensor.byte_size();
        }
    }
    return n;
}

std::size_t ParamBundle::collected_bytes() const noexcept {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) {
        if (e.op == AggOp::Collect) {
            n += e.tensor.byte_size();
        }
    }
    return n;
}

}  // namespace parrot
