#include "promptgate/dataset.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "promptgate/error.hpp"
#include "promptgate/linalg.hpp"

namespace promptgate {

std::string_view to_string(Split split) {
    switch (split) {
        case Split::SeedLabeled: return "seed";
        case Split::Unlabeled: return "unlabeled";
        case Split::Test: return "test";
    }
    return "unknown";
}

double ClientDataset::ood_ratio_actual() const {
    if (unlabeled.empty()) return 0.0;
    std::size_t ood = 0;
    for (const auto& s : unlabeled) ood += s.truth.is_ood() ? 1 : 0;
    return static_cast<double>(ood) / static_cast<double>(unlabeled.size());
}

void FederatedDataset::validate() const {
    if (num_classes < 2) throw Error(ErrorCode::InvalidSpec, "need at least 2 classes");
    if (dimension < 2) throw Error(ErrorCode::InvalidSpec, "need dimension >= 2");
    if (clients.empty()) throw Error(ErrorCode::InvalidSpec, "no clients");
    if (!anchors.empty()) {
        if (anchors.size() != static_cast<std::size_t>(num_classes) + 1) {
            throw Error(ErrorCode::InvalidShape, "expected " + std::to_string(num_classes + 1) +
                                                     " anchors, got " + std::to_string(anchors.size()));
        }
        for (const auto& a : anchors) {
            if (a.size() != static_cast<std::size_t>(dimension)) {
                throw Error(ErrorCode::DimensionMismatch, "anchor dimension differs from dataset");
            }
            if (std::abs(norm(a) - 1.0) > 1e-9) throw Error(ErrorCode::InvalidSpec, "anchor not unit norm");
        }
    }
    std::unordered_set<std::int64_t> seen;
    for (std::size_t k = 0; k < clients.size(); ++k) {
        const auto& client = clients[k];
        if (client.client_id != static_cast<int>(k)) {
            throw Error(ErrorCode::InvalidSpec, "client ids must be contiguous from 0");
        }
        for (const auto* list : {&client.labeled, &client.unlabeled, &client.test}) {
            for (const auto& s : *list) {
                if (!seen.insert(s.sample_id).second) {
                    throw Error(ErrorCode::DuplicateSampleId, "sample_id " + std::to_string(s.sample_id));
                }
                if (s.embedding.size() != static_cast<std::size_t>(dimension)) {
                    throw Error(ErrorCode::DimensionMismatch, "sample_id " + std::to_string(s.sample_id));
                }
                if (!all_finite(s.embedding)) {
                    throw Error(ErrorCode::InvalidSpec, "non-finite embedding for sample_id " +
                                                            std::to_string(s.sample_id));
                }
                if (s.client_id != client.client_id) {
                    throw Error(ErrorCode::InvalidSpec, "sample stored under the wrong client");
                }
                const int bound = s.truth.is_id() ? num_classes : num_ood_modes;
                if (s.truth.index < 0 || s.truth.index >= bound) {
                    throw Error(ErrorCode::InvalidLabel, "label index out of range for sample_id " +
                                                             std::to_string(s.sample_id));
                }
            }
        }
        for (const auto& s : client.labeled) {
            if (!s.truth.is_id()) {
                throw Error(ErrorCode::InvalidSpec, "seed labeled set must contain only ID samples");
            }
        }
    }
}

}  // namespace promptgate
