#include "promptgate/task_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "promptgate/error.hpp"

namespace promptgate {

LinearProbe LinearProbe::zeros(int num_classes, int dimension) {
    LinearProbe p;
    p.weights = Matrix(num_classes, dimension);
    p.bias.assign(num_classes, 0.0);
    return p;
}

std::vector<double> predict_probs(const LinearProbe& model, std::span<const double> z) {
    if (z.size() != model.weights.cols()) throw Error(ErrorCode::DimensionMismatch, "probe input dimension");
    std::vector<double> logits = multiply(model.weights, z);
    for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += model.bias[c];
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& v : logits) {
        v = std::exp(v - max_logit);
        total += v;
    }
    for (double& v : logits) v /= total;
    return logits;
}

int predict_class(const LinearProbe& model, std::span<const double> z) {
    const auto probs = predict_probs(model, z);
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

std::vector<double> train_local(LinearProbe& model, std::span<const LabeledEmbedding> labeled,
                                const ProbeHyper& hyper, Rng& rng) {
    if (labeled.empty()) throw Error(ErrorCode::EmptyBatch, "no labeled examples for the probe");
    const int C = model.num_classes();
    for (const auto& ex : labeled) {
        if (ex.slot < 0 || ex.slot >= C) {
            throw Error(ErrorCode::InvalidClass, "class " + std::to_string(ex.slot) + " is not an ID class");
        }
        if (ex.embedding.size() != model.weights.cols()) {
            throw Error(ErrorCode::DimensionMismatch, "probe training embedding dimension");
        }
    }
    if (hyper.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    std::vector<double> trace;
    if (hyper.epochs <= 0) return trace;

    std::vector<std::size_t> order(labeled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto D = model.weights.cols();
    const auto batch = static_cast<std::size_t>(hyper.batch_size);
    Matrix grad_w(C, D);
    std::vector<double> grad_b(C);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t count = std::min(batch, order.size() - start);
            std::fill(grad_w.values().begin(), grad_w.values().end(), 0.0);
            std::fill(grad_b.begin(), grad_b.end(), 0.0);
            for (std::size_t i = start; i < start + count; ++i) {
                const auto& ex = labeled[order[i]];
                const auto probs = predict_probs(model, ex.embedding);
                total -= std::log(std::max(probs[ex.slot], 1e-300));
                for (int c = 0; c < C; ++c) {
                    const double delta = (probs[c] - (c == ex.slot ? 1.0 : 0.0)) / static_cast<double>(count);
                    auto row = grad_w.row(c);
                    for (std::size_t d = 0; d < D; ++d) row[d] += delta * ex.embedding[d];
                    grad_b[c] += delta;
                }
            }
            auto w = model.weights.values();
            const auto g = grad_w.values();
            for (std::size_t j = 0; j < w.size(); ++j) w[j] -= hyper.lr * g[j];
            for (int c = 0; c < C; ++c) model.bias[c] -= hyper.lr * grad_b[c];
        }
        trace.push_back(total / static_cast<double>(order.size()));
    }
    model.trained = true;
    return trace;
}

LinearProbe fedavg_linear(std::span<const LinearProbe> models, std::span<const double> weights) {
    if (models.empty() || models.size() != weights.size()) {
        throw Error(ErrorCode::ShapeMismatch, "need one weight per model and at least one model");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw Error(ErrorCode::InvalidConfig, "weights must be finite and >= 0");
        total += w;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::ZeroWeightSum, "aggregation weights sum to zero");
    const auto& first = models.front();
    for (const auto& m : models) {
        if (!m.weights.same_shape(first.weights) || m.bias.size() != first.bias.size()) {
            throw Error(ErrorCode::ShapeMismatch, "probe shapes differ");
        }
    }
    // Running weighted mean: exact when all inputs agree.
    LinearProbe out = LinearProbe::zeros(first.num_classes(), first.dimension());
    auto w_out = out.weights.values();
    double seen = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) {
        if (weights[i] == 0.0) continue;
        seen += weights[i];
        const double share = weights[i] / seen;
        const auto w_in = models[i].weights.values();
        for (std::size_t j = 0; j < w_out.size(); ++j) w_out[j] += share * (w_in[j] - w_out[j]);
        for (std::size_t c = 0; c < out.bias.size(); ++c) out.bias[c] += share * (models[i].bias[c] - out.bias[c]);
        out.trained = out.trained || models[i].trained;
    }
    return out;
}

}  // namespace promptgate
