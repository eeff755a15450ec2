#pragma once

#include <cstdint>
#include <vector>

#include "promptgate/dataset.hpp"

namespace promptgate {

/// Parameters of the synthetic federated open-set benchmark.
///
/// ID class c has raw centroid (mean_separation / sqrt 2) * q_c with q_c
/// orthonormal, so centroids are pairwise exactly `mean_separation` apart.
/// OOD mode m sits at the same radius along lambda * q_{m mod C} +
/// sqrt(1 - lambda^2) * w_m where w_m is orthogonal to every q_c and lambda
/// is `ood_id_affinity`; it leaves the ID hull whenever lambda < 1. Each
/// client adds its own offset of length `client_shift` to every sample. All
/// embeddings are l2-normalized after sampling.
struct SyntheticSpec {
    int num_clients = 4;
    int num_classes = 8;
    int num_ood_modes = 4;
    int dimension = 64;
    double mean_separation = 1.4142135623730951;
    double within_class_std = 0.08;
    double ood_std = 0.08;
    double client_shift = 0.3;
    double ood_id_affinity = 0.6;
    int seed_labeled_per_class = 16;
    int unlabeled_per_client = 2000;
    int test_per_client = 500;
    std::vector<double> ood_ratio = {0.322, 0.354, 0.357, 0.325};
    /// Negative: test pools use the client's unlabeled ood_ratio.
    double test_ood_ratio = -1.0;
    /// Zero-shot anchors are the true directions rotated by this fraction of
    /// 90 degrees (0 = perfectly aligned, 1 = orthogonal).
    double template_misalignment = 0.5;
    /// When true client k only sees OOD modes m with m mod K == k.
    bool exclusive_ood_modes = false;

    void validate() const;

    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

/// Pure function of (spec, seed). Anchors are drawn from a separate stream, so
/// changing the misalignment leaves every sample untouched.
FederatedDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace promptgate
