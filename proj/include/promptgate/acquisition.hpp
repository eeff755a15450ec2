#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promptgate/dataset.hpp"
#include "promptgate/rng.hpp"
#include "promptgate/task_model.hpp"

namespace promptgate {

struct StrategyKind {
    enum class Kind { Random, Entropy, KMeansDiverse };

    Kind kind = Kind::Random;
    int max_iters = 25;  // k-means only

    static StrategyKind random() { return {Kind::Random, 25}; }
    static StrategyKind entropy() { return {Kind::Entropy, 25}; }
    static StrategyKind kmeans(int iters = 25) { return {Kind::KMeansDiverse, iters}; }

    friend bool operator==(const StrategyKind&, const StrategyKind&) = default;
};

/// "random" | "entropy" | "kmeans"
std::string to_string(const StrategyKind& kind);
StrategyKind parse_strategy(std::string_view name);

/// Everything a strategy may look at. New strategies (e.g. ones that use
/// the labeled set) plug in through this record.
struct AcquisitionInput {
    std::span<const Sample> gated;
    std::span<const Sample> labeled;
    const LinearProbe* model = nullptr;
};

std::vector<Sample> select_random(std::span<const Sample> pool, int budget, Rng& rng);

/// Highest predictive entropy first; ties by ascending sample_id.
std::vector<Sample> select_entropy(std::span<const Sample> pool, const LinearProbe& model, int budget);

/// One representative (nearest member to the centroid) per k-means cluster.
std::vector<Sample> select_kmeans(std::span<const Sample> pool, int budget, Rng& rng, int max_iters);

/// Shannon entropy in nats; zero-probability terms contribute nothing.
double entropy(std::span<const double> probs);

std::vector<Sample> select(const StrategyKind& kind, const AcquisitionInput& input, int budget, Rng& rng);

}  // namespace promptgate
