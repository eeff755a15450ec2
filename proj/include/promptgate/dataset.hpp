#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "promptgate/embedding.hpp"

namespace promptgate {

/// Prompt/label slot. ID classes occupy 0..C-1; the coarse OOD slot is C.
using Slot = int;

constexpr Slot ood_slot(int num_classes) noexcept { return num_classes; }

struct GroundTruth {
    enum class Kind : std::uint8_t { Id, Ood };

    Kind kind = Kind::Id;
    int index = 0;  // class index for Id, mode index for Ood

    static GroundTruth id(int c) { return {Kind::Id, c}; }
    static GroundTruth ood(int m) { return {Kind::Ood, m}; }

    bool is_id() const noexcept { return kind == Kind::Id; }
    bool is_ood() const noexcept { return kind == Kind::Ood; }

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

enum class Split : std::uint8_t { SeedLabeled, Unlabeled, Test };

std::string_view to_string(Split split);

struct Sample {
    std::int64_t sample_id = 0;
    int client_id = 0;
    Embedding embedding;
    GroundTruth truth;
    Split split = Split::Unlabeled;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct ClientDataset {
    int client_id = 0;
    std::vector<Sample> labeled;    // L_k, ID only
    std::vector<Sample> unlabeled;  // U_k
    std::vector<Sample> test;

    /// Fraction of OOD samples in the unlabeled pool, recomputed on each call.
    double ood_ratio_actual() const;

    friend bool operator==(const ClientDataset&, const ClientDataset&) = default;
};

struct FederatedDataset {
    int num_classes = 0;
    int num_ood_modes = 0;
    int dimension = 0;
    std::vector<ClientDataset> clients;
    /// Zero-shot template anchors, one per slot (C ID slots then the OOD slot).
    std::vector<Embedding> anchors;

    int num_clients() const noexcept { return static_cast<int>(clients.size()); }

    /// Checks dimensions, finiteness, id uniqueness, client ids, seed-set purity
    /// and anchor shape. Throws Error on the first violation.
    void validate() const;

    friend bool operator==(const FederatedDataset&, const FederatedDataset&) = default;
};

}  // namespace promptgate
