#include <parrot/wire.hpp>

#include <parrot/errors.hpp>

#include <bit>
#include <cstring>

namespace parrot::wire {

void Writer::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffU));
    }
}

void Writer::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffU));
    }
}

void Writer::f64(double v) {
    u64(std::bit_cast<std::uint64_t>(v));
}

void Writer::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    const auto* p = reinterpret_cast<const std::byte*>(s.data());
    buf_.insert(buf_.end(), p, p + s.size());
}

void Writer::tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) {
        u64(static_cast<std::uint64_t>(d));
    }
    for (double v : t.data) {
        f64(v);
    }
}

void Writer::bundle(const ParamBundle& b) {
    u32(static_cast<std::uint32_t>(b.size()));
    for (const auto& [name, e] : b.entries()) {
        str(name);
        u8(static_cast<std::uint8_t>(e.op));
        f64(e.weight);
        i64(e.origin_client);
        tensor(e.tensor);
    }
}

std::span<const std::byte> Reader::take(std::size_t n) {
    if (n > remaining()) {
        throw WireFormatError("truncated payload: need " + std::to_string(n) + " bytes, have " +
                              std::to_string(remaining()));
    }
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
}

std::uint8_t Reader::u8() {
    return static_cast<std::uint8_t>(take(1)[0]);
}

std::uint32_t Reader::u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(s[static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

std::uint64_t Reader::u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(s[static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

double Reader::f64() {
    return std::bit_cast<double>(u64());
}

std::string Reader::str() {
    const auto n = u32();
    auto s = take(n);
    return std::string(reinterpret_cast<const char*>(s.data()), s.size());
}

Tensor Reader::tensor() {
    const auto ndim = u32();
    if (ndim > 8) {
        throw WireFormatError("tensor rank " + std::to_string(ndim) + " exceeds limit");
    }
    std::vector<std::int64_t> shape(ndim);
    std::size_t n = 1;
    for (auto& d : shape) {
        d = i64();
        if (d < 0) {
            throw WireFormatError("negative tensor dimension");
        }
        n *= static_cast<std::size_t>(d);
    }
    if (n > remaining() / sizeof(double)) {
        throw WireFormatError("tensor data exceeds payload");
    }
    std::vector<double> data(n);
    for (auto& v : data) {
        v = f64();
    }
    return Tensor(std::move(shape), std::move(data));
}

ParamBundle Reader::bundle() {
    ParamBundle b;
    const auto n = u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto name = str();
        const auto op = u8();
        if (op > static_cast<std::uint8_t>(AggOp::Collect)) {
            throw WireFormatError("unknown aggregation op " + std::to_string(op));
        }
        const double weight = f64();
        const auto origin = static_cast<int>(i64());
        b.set(name, tensor(), static_cast<AggOp>(op), weight, origin);
    }
    return b;
}

}  // namespace parrot::wire
