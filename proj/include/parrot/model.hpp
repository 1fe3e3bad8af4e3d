#pragma once

#include <parrot/bundle.hpp>
#include <parrot/data.hpp>
#include <parrot/tensor.hpp>

#include <cstdint>
#include <span>
#include <string>

namespace parrot {

// Multinomial logistic regression: logits = W x + b.
struct ModelParams {
    Tensor weights;  // n_classes x n_features
    Tensor bias;     // n_classes

    static ModelParams zeros(int n_classes, int n_features);
    // Entries drawn from N(0, scale^2).
    static ModelParams random(int n_classes, int n_features, double scale, std::uint64_t seed);

    int n_classes() const noexcept { return static_cast<int>(bias.numel()); }
    int n_features() const noexcept {
        return bias.numel() == 0 ? 0 : static_cast<int>(weights.numel() / bias.numel());
    }

    bool all_finite() const noexcept { return weights.all_finite() && bias.all_finite(); }
    void axpy(double alpha, const ModelParams& x);
    void scale(double alpha);

    bool operator==(const ModelParams&) const = default;
};

inline constexpr std::string_view kModelPrefix = "model";

// Stores the two tensors as "<prefix>.weights" / "<prefix>.bias".
void put_params(ParamBundle& bundle, std::string_view prefix, const ModelParams& params,
                AggOp op = AggOp::WeightedAverage, double weight = 1.0, int origin_client = -1);
ModelParams get_params(const ParamBundle& bundle, std::string_view prefix = kModelPrefix);

// Mean cross-entropy over `indices`. When `grad` is non-null it receives the
// gradient of that mean, sized like `model`.
double loss_and_gradient(const ModelParams& model, const SyntheticDataset& data,
                         std::span<const std::size_t> indices, ModelParams* grad);

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

// Throws DimensionMismatch when the model and data disagree.
Evaluation evaluate(const ModelParams& model, const SyntheticDataset& data);

}  // namespace parrot
