#pragma once

#include <parrot/bundle.hpp>
#include <parrot/tensor.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace parrot::wire {

// Little-endian byte encoder shared by the message transport and the state
// store. Doubles are written as their IEEE-754 bit pattern.
class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v);
    void str(std::string_view s);
    void tensor(const Tensor& t);
    void bundle(const ParamBundle& b);

    std::size_t size() const noexcept { return buf_.size(); }
    std::vector<std::byte>& bytes() noexcept { return buf_; }
    std::vector<std::byte> take() && { return std::move(buf_); }

private:
    std::vector<std::byte> buf_;
};

// Bounds-checked decoder; throws WireFormatError on truncation.
class Reader {
public:
    explicit Reader(std::span<const std::byte> data) : data_(data) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64();
    std::string str();
    Tensor tensor();
    ParamBundle bundle();

    bool at_end() const noexcept { return pos_ == data_.size(); }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    std::span<const std::byte> take(std::size_t n);

    std::span<const std::byte> data_;
    std::size_t pos_ = 0;
};

}  // namespace parrot::wire
