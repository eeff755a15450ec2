#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "promptgate/dataset.hpp"
#include "promptgate/linalg.hpp"
#include "promptgate/rng.hpp"

namespace promptgate {

/// Split of each slot's context between federated (global) and private (local) tokens.
struct PromptVariant {
    enum class Kind : std::uint8_t { Mixed, GlobalOnly, LocalOnly };

    Kind kind = Kind::Mixed;
    int global_tokens = 8;
    int local_tokens = 8;

    static PromptVariant mixed(int g = 8, int l = 8) { return {Kind::Mixed, g, l}; }
    static PromptVariant global_only(int g = 16) { return {Kind::GlobalOnly, g, 0}; }
    static PromptVariant local_only(int l = 16) { return {Kind::LocalOnly, 0, l}; }

    void validate() const;

    friend bool operator==(const PromptVariant&, const PromptVariant&) = default;
};

std::string_view to_string(PromptVariant::Kind kind);

/// Class-specific context tokens. One global matrix per slot (C ID slots + OOD)
/// and one local matrix per (client, slot).
struct PromptBank {
    int num_slots = 0;
    int dimension = 0;
    int global_tokens = 0;
    int local_tokens = 0;
    std::vector<Matrix> global;              // [slot]
    std::vector<std::vector<Matrix>> local;  // [client][slot]

    int num_clients() const noexcept { return static_cast<int>(local.size()); }

    friend bool operator==(const PromptBank&, const PromptBank&) = default;
};

/// Gradients with the same layout as the client-visible part of a bank.
struct PromptGrads {
    std::vector<Matrix> global;  // [slot]
    std::vector<Matrix> local;   // [slot], for the client the gradient was taken at
};

/// Stand-in for the frozen text encoder: t_c = normalize(mix * mean(context) + e_c).
struct FrozenTextMixer {
    Matrix mix;                     // D x D, never trained
    std::vector<Embedding> anchors; // C + 1 unit template embeddings

    int dimension() const noexcept { return static_cast<int>(mix.rows()); }
    int num_slots() const noexcept { return static_cast<int>(anchors.size()); }

    /// Random orthogonal mix matrix (all singular values 1) from `seed`.
    static FrozenTextMixer make(std::vector<Embedding> anchors, std::uint64_t seed);
    static FrozenTextMixer identity(std::vector<Embedding> anchors);
};

struct OptimizerState {
    std::vector<Matrix> global_momentum;
    std::vector<Matrix> local_momentum;
    std::int64_t steps = 0;

    /// Zero buffers shaped like `client`'s trainable tokens.
    static OptimizerState zeros_like(const PromptBank& bank);
};

struct PromptHyper {
    double lr = 0.002;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int epochs = 15;
    int shot_cap = 128;  // per slot (N-shot)
    int batch_size = 32;
    double tau = 0.07;

    friend bool operator==(const PromptHyper&, const PromptHyper&) = default;
};

struct LabeledEmbedding {
    Embedding embedding;
    Slot slot = 0;
};

PromptBank init_prompt_bank(const PromptVariant& variant, int num_classes, int dimension, int num_clients,
                            std::uint64_t seed);

/// Prompted text embedding t^k_c for `client` and `slot`.
Embedding encode_class(const PromptBank& bank, const FrozenTextMixer& mixer, int client, Slot slot);

/// All C + 1 prompted text embeddings for one client.
std::vector<Embedding> encode_all(const PromptBank& bank, const FrozenTextMixer& mixer, int client);

/// Softmax over cosine similarities divided by tau.
std::vector<double> class_probabilities(std::span<const double> z, std::span<const Embedding> texts, double tau);

struct LossAndGrads {
    double loss = 0.0;
    PromptGrads grads;
};

/// Mean cross-entropy over the batch and its exact gradient with respect to
/// every global token and `client`'s local tokens.
LossAndGrads prompt_loss_and_grads(std::span<const LabeledEmbedding> batch, const PromptBank& bank,
                                   const FrozenTextMixer& mixer, int client, double tau);

/// Loss only; shares the forward path with prompt_loss_and_grads.
double prompt_loss(std::span<const LabeledEmbedding> batch, const PromptBank& bank, const FrozenTextMixer& mixer,
                   int client, double tau);

/// Heavy-ball SGD with L2 folded into the gradient:
///   g' = g + wd * p;  buf = momentum * buf + g';  p -= lr * buf
void sgd_momentum_step(std::span<Matrix> params, std::span<const Matrix> grads, std::span<Matrix> buffers,
                       double lr, double momentum, double weight_decay);

/// Applies one step to `client`'s trainable tokens of `bank`.
void sgd_momentum_step(PromptBank& bank, int client, const PromptGrads& grads, OptimizerState& state, double lr,
                       double momentum, double weight_decay);

/// Class-balanced round-robin subsample: at most `per_slot_cap` examples of
/// each slot and at most `cap` in total.
std::vector<LabeledEmbedding> balanced_subsample(std::span<const LabeledEmbedding> labeled, int num_slots, int cap,
                                                 Rng& rng, int per_slot_cap = std::numeric_limits<int>::max());

struct PromptTrainResult {
    std::vector<double> loss_per_epoch;
    int samples_used = 0;
};

/// Trains the client's working copy of the global tokens and its local tokens.
PromptTrainResult train_prompts(PromptBank& bank, const FrozenTextMixer& mixer, int client,
                                std::span<const LabeledEmbedding> labeled, const PromptHyper& hyper, Rng& rng);

// Checkpoint: "PGBANK01", then u32 slots, d_g, d_l, D, K, then little-endian
// doubles: global[slot] row-major, then local[client][slot] row-major.
void save_prompt_bank(std::ostream& out, const PromptBank& bank);
PromptBank load_prompt_bank(std::istream& in);
void save_prompt_bank(const std::filesystem::path& path, const PromptBank& bank);
PromptBank load_prompt_bank(const std::filesystem::path& path);

}  // namespace promptgate
