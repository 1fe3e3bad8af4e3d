#include <parrot/model.hpp>

#include <parrot/errors.hpp>
#include <parrot/rng.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace parrot {

ModelParams ModelParams::zeros(int n_classes, int n_features) {
    return ModelParams{Tensor::zeros({n_classes, n_features}), Tensor::zeros({n_classes})};
}

ModelParams ModelParams::random(int n_classes, int n_features, double scale, std::uint64_t seed) {
    auto m = zeros(n_classes, n_features);
    auto rng = make_rng(seed, stream::kModelInit);
    std::normal_distribution<double> dist(0.0, scale);
    for (double& v : m.weights.data) v = dist(rng);
    for (double& v : m.bias.data) v = dist(rng);
    return m;
}

void ModelParams::axpy(double alpha, const ModelParams& x) {
    weights.axpy(alpha, x.weights);
    bias.axpy(alpha, x.bias);
}

void ModelParams::scale(double alpha) {
    weights.scale(alpha);
    bias.scale(alpha);
}

void put_params(ParamBundle& bundle, std::string_view prefix, const ModelParams& params, AggOp op,
                double weight, int origin_client) {
    const std::string p(prefix);
    bundle.set(p + ".weights", params.weights, op, weight, origin_client);
    bundle.set(p + ".bias", params.bias, op, weight, origin_client);
}

ModelParams get_params(const ParamBundle& bundle, std::string_view prefix) {
    const std::string p(prefix);
    ModelParams m{bundle.tensor(p + ".weights"), bundle.tensor(p + ".bias")};
    if (m.weights.shape.size() != 2 || m.bias.shape.size() != 1 ||
        m.weights.shape[0] != m.bias.shape[0]) {
        throw DimensionMismatch("'" + p + "' is not a (classes x features, classes) pair");
    }
    return m;
}

namespace {

// Writes softmax(W x + b) into `probs` and returns the log-sum-exp of the logits.
double softmax_row(const ModelParams& model, const double* x, std::size_t f, std::vector<double>& probs) {
    const std::size_t c = model.bias.numel();
    double max_logit = -INFINITY;
    for (std::size_t k = 0; k < c; ++k) {
        const double* w = model.weights.data.data() + k * f;
        double z = model.bias.data[k];
        for (std::size_t j = 0; j < f; ++j) {
            z += w[j] * x[j];
        }
        probs[k] = z;
        max_logit = std::max(max_logit, z);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        probs[k] = std::exp(probs[k] - max_logit);
        sum += probs[k];
    }
    for (std::size_t k = 0; k < c; ++k) {
        probs[k] /= sum;
    }
    return max_logit + std::log(sum);
}

void check_dims(const ModelParams& model, const SyntheticDataset& data) {
    if (model.n_classes() != data.params.n_classes || model.n_features() != data.params.n_features) {
        throw DimensionMismatch("model is " + std::to_string(model.n_classes()) + "x" +
                                std::to_string(model.n_features()) + " but data has " +
                                std::to_string(data.params.n_classes) + " classes and " +
                                std::to_string(data.params.n_features) + " features");
    }
}

}  // namespace

double loss_and_gradient(const ModelParams& model, const SyntheticDataset& data,
                         std::span<const std::size_t> indices, ModelParams* grad) {
    check_dims(model, data);
    const auto c = static_cast<std::size_t>(model.n_classes());
    const auto f = static_cast<std::size_t>(model.n_features());
    if (grad != nullptr) {
        *grad = ModelParams::zeros(static_cast<int>(c), static_cast<int>(f));
    }
    if (indices.empty()) {
        return 0.0;
    }
    std::vector<double> probs(c);
    double loss = 0.0;
    for (auto i : indices) {
        const double* x = data.row(i);
        const auto y = static_cast<std::size_t>(data.labels[i]);
        double dot_y = model.bias.data[y];
        for (std::size_t j = 0; j < f; ++j) {
            dot_y += model.weights.data[y * f + j] * x[j];
        }
        const double lse = softmax_row(model, x, f, probs);
        loss += lse - dot_y;
        if (grad != nullptr) {
            for (std::size_t k = 0; k < c; ++k) {
                const double r = probs[k] - (k == y ? 1.0 : 0.0);
                double* g = grad->weights.data.data() + k * f;
                for (std::size_t j = 0; j < f; ++j) {
                    g[j] += r * x[j];
                }
                grad->bias.data[k] += r;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    if (grad != nullptr) {
        grad->scale(inv);
    }
    return loss * inv;
}

Evaluation evaluate(const ModelParams& model, const SyntheticDataset& data) {
    check_dims(model, data);
    const auto c = static_cast<std::size_t>(model.n_classes());
    const auto f = static_cast<std::size_t>(model.n_features());
    std::vector<double> probs(c);
    std::int64_t correct = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(data.n_samples); ++i) {
        const double* x = data.row(i);
        const auto y = static_cast<std::size_t>(data.labels[i]);
        softmax_row(model, x, f, probs);
        const auto best = static_cast<std::size_t>(
            std::distance(probs.begin(), std::max_element(probs.begin(), probs.end())));
        if (best == y) {
            ++correct;
        }
        loss -= std::log(std::max(probs[y], 1e-300));
    }
    const auto n = static_cast<double>(data.n_samples);
    return Evaluation{static_cast<double>(correct) / n, loss / n};
}

}  // namespace parrot
