#pragma once

#include <span>
#include <vector>

#include "promptgate/linalg.hpp"
#include "promptgate/prompt.hpp"
#include "promptgate/rng.hpp"

namespace promptgate {

/// Softmax linear classifier over the C ID classes (no OOD output).
struct LinearProbe {
    Matrix weights;             // C x D
    std::vector<double> bias;   // C
    bool trained = false;

    static LinearProbe zeros(int num_classes, int dimension);

    int num_classes() const noexcept { return static_cast<int>(weights.rows()); }
    int dimension() const noexcept { return static_cast<int>(weights.cols()); }

    friend bool operator==(const LinearProbe&, const LinearProbe&) = default;
};

struct ProbeHyper {
    int epochs = 15;
    int batch_size = 32;
    double lr = 0.0005;

    friend bool operator==(const ProbeHyper&, const ProbeHyper&) = default;
};

std::vector<double> predict_probs(const LinearProbe& model, std::span<const double> z);
int predict_class(const LinearProbe& model, std::span<const double> z);

/// Mini-batch SGD on cross-entropy. Returns the mean loss of each epoch.
/// Labels are class indices in 0..C-1 carried in LabeledEmbedding::slot.
std::vector<double> train_local(LinearProbe& model, std::span<const LabeledEmbedding> labeled,
                                const ProbeHyper& hyper, Rng& rng);

/// Coordinate-wise weighted mean; weights are normalized to sum to one.
LinearProbe fedavg_linear(std::span<const LinearProbe> models, std::span<const double> weights);

}  // namespace promptgate
