#include <parrot/tensor.hpp>

#include <parrot/errors.hpp>

#include <cmath>
#include <sstream>

namespace parrot {

Tensor::Tensor(std::vector<std::int64_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_))
    , data(std::move(data_)) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeMismatch("tensor shape " + shape_string(shape) + " does not match " +
                            std::to_string(data.size()) + " elements");
    }
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) {
    return Tensor({1}, {value});
}

bool Tensor::all_finite() const noexcept {
    for (double v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

void Tensor::axpy(double alpha, const Tensor& x) {
    if (!same_shape(x)) {
        throw ShapeMismatch("axpy: " + shape_string(shape) + " vs " + shape_string(x.shape));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] += alpha * x.data[i];
    }
}

void Tensor::scale(double alpha) {
    for (double& v : data) {
        v *= alpha;
    }
}

std::string shape_string(std::span<const std::int64_t> shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) {
            os << 'x';
        }
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(std::span<const std::int64_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        if (d < 0) {
            throw ShapeMismatch("negative dimension in shape " + shape_string(shape));
        }
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

}  // namespace parrot
