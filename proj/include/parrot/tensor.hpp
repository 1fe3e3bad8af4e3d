#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace parrot {

// Dense row-major tensor of doubles. Shapes are small (<= 2 dims in practice)
// so the shape is kept as a plain vector.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::int64_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::int64_t> shape);
    static Tensor scalar(double value);

    std::size_t numel() const noexcept { return data.size(); }
    std::size_t byte_size() const noexcept { return data.size() * sizeof(double); }

    bool same_shape(const Tensor& other) const noexcept { return shape == other.shape; }
    bool all_finite() const noexcept;

    // this += alpha * x
    void axpy(double alpha, const Tensor& x);
    void scale(double alpha);

    bool operator==(const Tensor& other) const = default;
};

std::string shape_string(std::span<const std::int64_t> shape);

std::size_t shape_numel(std::span<const std::int64_t> shape);

}  // namespace parrot
