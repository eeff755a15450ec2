#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "promptgate/dataset.hpp"
#include "promptgate/gate.hpp"

namespace promptgate {

struct QueryRecord {
    std::int64_t sample_id = 0;
    GroundTruth truth;
};

/// Per-client query log. rounds[r - 1] holds the queries of round r.
struct QueryHistory {
    std::vector<std::vector<QueryRecord>> rounds;
    std::int64_t initial_id_count = 0;  // true-ID samples in the initial unlabeled pool
};

/// Fraction of true-ID samples among one round's queries. Throws EmptyQuerySet.
double query_precision(std::span<const QueryRecord> queries);

/// True-ID queried in rounds 1..r over the initial unlabeled-pool ID count.
double accumulated_query_recall(const QueryHistory& history, int round);

/// Fraction of true-ID samples in a gated pool. Throws EmptyPool.
double pool_purity(std::span<const Sample> gated);

/// Mean per-class recall over the classes present in `labels`. A prediction
/// outside 0..C-1 (e.g. the OOD slot) is simply wrong.
double balanced_multiclass_accuracy(std::span<const int> predictions, std::span<const int> labels, int num_classes);

struct GateTestMetrics {
    double binary_accuracy = 0.0;
    double ood_recall = 0.0;
    double id_bma = 0.0;
};

/// `predicted[i]` is the gate's slot for `test[i]` (C = OOD). Throws
/// MissingStratum when the test set lacks ID or OOD samples.
GateTestMetrics gate_test_metrics(std::span<const Sample> test, std::span<const Slot> predicted, int num_classes);
GateTestMetrics gate_test_metrics(const GateView& gate, std::span<const Sample> test);

/// Absent (nullopt) instead of throwing for the undefined cases.
std::optional<double> try_query_precision(std::span<const QueryRecord> queries);
std::optional<double> try_pool_purity(std::span<const Sample> gated);

}  // namespace promptgate
