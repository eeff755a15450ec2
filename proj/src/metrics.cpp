#include "promptgate/metrics.hpp"

#include <string>

#include "promptgate/error.hpp"

namespace promptgate {

double query_precision(std::span<const QueryRecord> queries) {
    if (queries.empty()) throw Error(ErrorCode::EmptyQuerySet, "query precision of an empty round");
    std::size_t id = 0;
    for (const auto& q : queries) id += q.truth.is_id() ? 1 : 0;
    return static_cast<double>(id) / static_cast<double>(queries.size());
}

double accumulated_query_recall(const QueryHistory& history, int round) {
    if (round < 1 || round > static_cast<int>(history.rounds.size())) {
        throw Error(ErrorCode::InvalidConfig, "round " + std::to_string(round) + " not in history");
    }
    if (history.initial_id_count <= 0) {
        throw Error(ErrorCode::ZeroDenominator, "initial unlabeled pool holds no ID samples");
    }
    std::int64_t retrieved = 0;
    for (int r = 0; r < round; ++r) {
        for (const auto& q : history.rounds[r]) retrieved += q.truth.is_id() ? 1 : 0;
    }
    return static_cast<double>(retrieved) / static_cast<double>(history.initial_id_count);
}

double pool_purity(std::span<const Sample> gated) {
    if (gated.empty()) throw Error(ErrorCode::EmptyPool, "purity of an empty gated pool");
    std::size_t id = 0;
    for (const auto& s : gated) id += s.truth.is_id() ? 1 : 0;
    return static_cast<double>(id) / static_cast<double>(gated.size());
}

double balanced_multiclass_accuracy(std::span<const int> predictions, std::span<const int> labels, int num_classes) {
    if (labels.empty()) throw Error(ErrorCode::NoLabels, "balanced accuracy needs labels");
    if (predictions.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "prediction/label count");
    std::vector<std::size_t> hits(num_classes, 0), totals(num_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes) throw Error(ErrorCode::InvalidClass, "label outside 0..C-1");
        ++totals[y];
        if (predictions[i] == y) ++hits[y];
    }
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (totals[c] == 0) continue;
        sum += static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
        ++present;
    }
    return sum / present;
}

GateTestMetrics gate_test_metrics(std::span<const Sample> test, std::span<const Slot> predicted, int num_classes) {
    if (test.size() != predicted.size()) throw Error(ErrorCode::ShapeMismatch, "prediction count");
    std::size_t agree = 0, ood_total = 0, ood_hit = 0;
    std::vector<int> id_pred, id_true;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const bool pred_id = predicted[i] < num_classes;
        const bool true_id = test[i].truth.is_id();
        agree += (pred_id == true_id) ? 1 : 0;
        if (true_id) {
            id_true.push_back(test[i].truth.index);
            id_pred.push_back(predicted[i]);
        } else {
            ++ood_total;
            ood_hit += pred_id ? 0 : 1;
        }
    }
    if (ood_total == 0) throw Error(ErrorCode::MissingStratum, "test set has no OOD samples");
    if (id_true.empty()) throw Error(ErrorCode::MissingStratum, "test set has no ID samples");
    GateTestMetrics out;
    out.binary_accuracy = static_cast<double>(agree) / static_cast<double>(test.size());
    out.ood_recall = static_cast<double>(ood_hit) / static_cast<double>(ood_total);
    out.id_bma = balanced_multiclass_accuracy(id_pred, id_true, num_classes);
    return out;
}

GateTestMetrics gate_test_metrics(const GateView& gate, std::span<const Sample> test) {
    std::vector<Slot> predicted;
    predicted.reserve(test.size());
    for (const auto& s : test) predicted.push_back(gate.predict(s).slot);
    return gate_test_metrics(test, predicted, gate.num_classes());
}

std::optional<double> try_query_precision(std::span<const QueryRecord> queries) {
    if (queries.empty()) return std::nullopt;
    return query_precision(queries);
}

std::optional<double> try_pool_purity(std::span<const Sample> gated) {
    if (gated.empty()) return std::nullopt;
    return pool_purity(gated);
}

}  // namespace promptgate
