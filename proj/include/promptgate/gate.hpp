#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "promptgate/dataset.hpp"
#include "promptgate/prompt.hpp"

namespace promptgate {

/// No filtering: the whole pool is queryable.
struct Coldstart {};
/// Reads ground truth; only true-ID samples are queryable. Simulation-only.
struct OracleUpperBound {};
/// Frozen anchors with `num_ood_templates` OOD anchors, fixed for all rounds.
/// Template j > 0 is normalize(e_OOD + spread * delta_j) with delta_j a seeded
/// unit direction; template 0 is e_OOD itself.
struct StaticZeroShot {
    int num_ood_templates = 1;
    double template_spread = 0.3;
    std::uint64_t template_seed = 0;
};
/// Learned prompts re-evaluated every round.
struct DynamicPromptGate {
    PromptVariant variant;
};

using GateMode = std::variant<Coldstart, OracleUpperBound, StaticZeroShot, DynamicPromptGate>;

/// "coldstart", "upper", "static" or "dynamic".
std::string mode_name(const GateMode& mode);
/// "mixed" / "global" / "local" for dynamic modes, "none" otherwise.
std::string variant_name(const GateMode& mode);

struct GateContext {
    const PromptBank* bank = nullptr;
    const FrozenTextMixer* mixer = nullptr;
    int client = 0;
    double tau = 0.07;
};

struct PseudoLabel {
    Slot slot = 0;  // index into the text list
    double confidence = 0.0;
};

/// Argmax of class_probabilities with ties going to the lowest slot.
PseudoLabel pseudo_label(std::span<const double> z, std::span<const Embedding> texts, double tau);

/// ID anchors followed by the static OOD templates.
std::vector<Embedding> static_texts(std::span<const Embedding> anchors, const StaticZeroShot& mode);

struct GatePrediction {
    Slot slot = 0;            // 0..C-1 for ID classes, C for OOD
    double confidence = 0.0;  // max probability; 1 for oracle, 0 when no pseudo-label exists
};

/// A gate frozen for one client and round: text embeddings are computed once.
class GateView {
public:
    GateView(const GateMode& mode, const GateContext& context, int num_classes);

    GatePrediction predict(const Sample& sample) const;
    bool has_pseudo_labels() const noexcept { return !texts_.empty(); }
    int num_classes() const noexcept { return num_classes_; }

private:
    enum class Kind { Coldstart, Oracle, Texts };
    Kind kind_ = Kind::Coldstart;
    int num_classes_ = 0;
    double tau_ = 0.07;
    std::vector<Embedding> texts_;
    std::vector<Embedding> id_anchors_;  // coldstart class guesses, may be empty
};

struct PartitionRecord {
    std::int64_t sample_id = 0;
    Slot slot = 0;
    double confidence = 0.0;
};

struct PoolPartition {
    std::vector<Sample> gated;        // C_k
    std::vector<Sample> exploration;  // E_k
    std::vector<PartitionRecord> records;  // static and dynamic modes only, pool order
};

PoolPartition partition_pool(std::span<const Sample> pool, const GateMode& mode, const GateContext& context,
                             int num_classes);

/// Re-applies a stored partition decision: samples whose id is in
/// `exploration_ids` (sorted) go to the exploration pool.
PoolPartition apply_partition(std::span<const Sample> pool, std::span<const std::int64_t> exploration_ids);

}  // namespace promptgate
