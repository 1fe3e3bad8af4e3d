#include <parrot/aggregate.hpp>

#include <parrot/errors.hpp>

#include <cmath>

namespace parrot {

std::size_t DevicePartial::averaged_bytes() const noexcept {
    std::size_t n = 0;
    for (const auto& [name, e] : entries) {
        if (e.op != AggOp::Collect) {
            n += e.sum.byte_size();
        }
    }
    return n;
}

std::size_t DevicePartial::collected_bytes() const noexcept {
    std::size_t n = 0;
    for (const auto& [name, e] : entries) {
        for (const auto& c : e.collected) {
            n += c.tensor.byte_size();
        }
    }
    return n;
}

void local_fold(DevicePartial& partial, const ParamBundle& result, int client_id) {
    // Validate everything before touching the partial so a failed fold leaves it intact.
    for (const auto& [name, e] : result.entries()) {
        if (e.op == AggOp::WeightedAverage && !(e.weight > 0.0 && std::isfinite(e.weight))) {
            throw Error("local_fold: entry '" + name + "' has non-positive weight");
        }
        auto it = partial.entries.find(name);
        if (it == partial.entries.end()) {
            continue;
        }
        if (it->second.op != e.op) {
            throw OpMismatch("local_fold: entry '" + name + "' is " + std::string(to_string(e.op)) +
                             " but was folded as " + std::string(to_string(it->second.op)));
        }
        if (it->second.shape != e.tensor.shape) {
            throw ShapeMismatch("local_fold: entry '" + name + "' has shape " +
                                shape_string(e.tensor.shape) + ", expected " +
                                shape_string(it->second.shape));
        }
    }

    for (const auto& [name, e] : result.entries()) {
        auto [it, inserted] = partial.entries.try_emplace(name);
        FoldedEntry& f = it->second;
        if (inserted) {
            f.op = e.op;
            f.shape = e.tensor.shape;
            if (e.op != AggOp::Collect) {
                f.sum = Tensor::zeros(e.tensor.shape);
            }
        }
        switch (e.op) {
        case AggOp::WeightedAverage:
            f.sum.axpy(e.weight, e.tensor);
            f.weight += e.weight;
            break;
        case AggOp::Sum:
        case AggOp::SimpleAverage:
            f.sum.axpy(1.0, e.tensor);
            break;
        case AggOp::Collect:
            f.collected.push_back(CollectedTensor{e.origin_client >= 0 ? e.origin_client : client_id,
                                                  e.tensor});
            break;
        }
        ++f.count;
    }
    partial.clients_folded.push_back(client_id);
}

AggregateResult global_fold(std::span<const DevicePartial> partials) {
    if (partials.empty()) {
        throw EmptyInput("global_fold: no device partials");
    }
    const DevicePartial* reference = nullptr;
    for (const auto& p : partials) {
        if (!p.empty()) {
            reference = &p;
            break;
        }
    }
    if (reference == nullptr) {
        throw EmptyInput("global_fold: no partial folded any client");
    }

    auto schema_error = [](const DevicePartial& p, const std::string& what) {
        return SchemaMismatch("global_fold: partial from device " + std::to_string(p.device_id) + " " + what);
    };

    std::map<std::string, FoldedEntry, std::less<>> total;
    AggregateResult out;
    for (const auto& p : partials) {
        if (p.empty()) {
            continue;
        }
        // Averaged entries must match the reference exactly; Collect entries may
        // be emitted by a subset of clients.
        for (const auto& [name, e] : reference->entries) {
            if (e.op == AggOp::Collect) {
                continue;
            }
            auto it = p.entries.find(name);
            if (it == p.entries.end()) {
                throw schema_error(p, "lacks entry '" + name + "'");
            }
        }
        for (const auto& [name, e] : p.entries) {
            auto ref = reference->entries.find(name);
            if (e.op != AggOp::Collect && ref == reference->entries.end()) {
                throw schema_error(p, "has unexpected entry '" + name + "'");
            }
            auto [it, inserted] = total.try_emplace(name);
            FoldedEntry& t = it->second;
            if (inserted) {
                t.op = e.op;
                t.shape = e.shape;
                if (e.op != AggOp::Collect) {
                    t.sum = Tensor::zeros(e.shape);
                }
            } else if (t.op != e.op || t.shape != e.shape) {
                throw schema_error(p, "disagrees on op or shape of '" + name + "'");
            }
            if (e.op == AggOp::Collect) {
                t.collected.insert(t.collected.end(), e.collected.begin(), e.collected.end());
            } else {
                t.sum.axpy(1.0, e.sum);
                t.weight += e.weight;
            }
            t.count += e.count;
        }
        out.clients += static_cast<std::int64_t>(p.clients_folded.size());
    }

    for (auto& [name, t] : total) {
        switch (t.op) {
        case AggOp::WeightedAverage: {
            if (!(t.weight > 0.0)) {
                throw SchemaMismatch("global_fold: entry '" + name + "' has zero total weight");
            }
            Tensor v = std::move(t.sum);
            v.scale(1.0 / t.weight);
            out.averaged.set(name, std::move(v), AggOp::WeightedAverage, t.weight);
            break;
        }
        case AggOp::Sum:
            out.averaged.set(name, std::move(t.sum), AggOp::Sum);
            break;
        case AggOp::SimpleAverage: {
            Tensor v = std::move(t.sum);
            v.scale(1.0 / static_cast<double>(t.count));
            out.averaged.set(name, std::move(v), AggOp::SimpleAverage, static_cast<double>(t.count));
            break;
        }
        case AggOp::Collect:
            out.collected[name] = std::move(t.collected);
            break;
        }
    }
    return out;
}

ParamBundle server_update(const AlgorithmPlugin& plugin, const ParamBundle& old_global,
                          const AggregateResult& aggregated, const ServerContext& ctx) {
    return plugin.server_update(old_global, aggregated, ctx);
}

void encode_partial(wire::Writer& w, const DevicePartial& p) {
    w.i64(p.device_id);
    w.u32(static_cast<std::uint32_t>(p.clients_folded.size()));
    for (int c : p.clients_folded) {
        w.i64(c);
    }
    w.u32(static_cast<std::uint32_t>(p.entries.size()));
    for (const auto& [name, e] : p.entries) {
        w.str(name);
        w.u8(static_cast<std::uint8_t>(e.op));
        w.u32(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) {
            w.i64(d);
        }
        w.f64(e.weight);
        w.i64(e.count);
        if (e.op == AggOp::Collect) {
            w.u32(static_cast<std::uint32_t>(e.collected.size()));
            for (const auto& c : e.collected) {
                w.i64(c.client_id);
                w.tensor(c.tensor);
            }
        } else {
            w.tensor(e.sum);
        }
    }
}

DevicePartial decode_partial(wire::Reader& r) {
    DevicePartial p;
    p.device_id = static_cast<int>(r.i64());
    const auto nc = r.u32();
    p.clients_folded.reserve(nc);
    for (std::uint32_t i = 0; i < nc; ++i) {
        p.clients_folded.push_back(static_cast<int>(r.i64()));
    }
    const auto ne = r.u32();
    for (std::uint32_t i = 0; i < ne; ++i) {
        auto name = r.str();
        FoldedEntry e;
        const auto op = r.u8();
        if (op > static_cast<std::uint8_t>(AggOp::Collect)) {
            throw WireFormatError("unknown aggregation op in partial");
        }
        e.op = static_cast<AggOp>(op);
        const auto ndim = r.u32();
        if (ndim > 8) {
            throw WireFormatError("entry rank exceeds limit");
        }
        e.shape.resize(ndim);
        for (auto& d : e.shape) {
            d = r.i64();
        }
        e.weight = r.f64();
        e.count = r.i64();
        if (e.op == AggOp::Collect) {
            const auto n = r.u32();
            for (std::uint32_t k = 0; k < n; ++k) {
                const auto client = static_cast<int>(r.i64());
                e.collected.push_back(CollectedTensor{client, r.tensor()});
            }
        } else {
            e.sum = r.tensor();
        }
        p.entries.emplace(std::move(name), std::move(e));
    }
    return p;
}

}  // namespace parrot
