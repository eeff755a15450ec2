#include "promptgate/prompt.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "promptgate/error.hpp"

namespace promptgate {

namespace {

constexpr double kInitStd = 0.02;

void check_client(const PromptBank& bank, int client) {
    if (client < 0 || client >= std::max(bank.num_clients(), 1)) {
        throw Error(ErrorCode::InvalidShape, "client " + std::to_string(client) + " outside bank");
    }
}

const Matrix& local_or_empty(const PromptBank& bank, int client, Slot slot) {
    static const Matrix kEmpty;
    if (bank.local.empty()) return kEmpty;
    return bank.local[client][slot];
}

// Forward pieces for one slot: pre-normalization vector and its norm.
struct SlotForward {
    Embedding text;
    double pre_norm = 0.0;
};

SlotForward forward_slot(const PromptBank& bank, const FrozenTextMixer& mixer, int client, Slot slot) {
    const auto D = static_cast<std::size_t>(bank.dimension);
    const auto context = stacked_row_mean(bank.global[slot], local_or_empty(bank, client, slot), D);
    Embedding v = multiply(mixer.mix, context);
    const auto& anchor = mixer.anchors[slot];
    for (std::size_t d = 0; d < D; ++d) v[d] += anchor[d];
    const double n = norm(v);
    if (n < kZeroNormThreshold) throw Error(ErrorCode::ZeroNorm, "prompted text embedding degenerated");
    for (double& x : v) x /= n;
    return {std::move(v), n};
}

void check_compatible(const PromptBank& bank, const FrozenTextMixer& mixer) {
    if (mixer.num_slots() != bank.num_slots || mixer.dimension() != bank.dimension) {
        throw Error(ErrorCode::ShapeMismatch, "mixer and prompt bank disagree on slots or dimension");
    }
}

// Returns log-sum-exp of logits and fills probabilities.
double softmax(std::span<const double> logits, std::vector<double>& probs) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    probs.resize(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        total += probs[i];
    }
    for (double& p : probs) p /= total;
    return max_logit + std::log(total);
}

struct BatchForward {
    double loss = 0.0;
    std::vector<Embedding> grad_text;  // dL/dt_c, filled only when requested
};

BatchForward batch_forward(std::span<const LabeledEmbedding> batch, const std::vector<SlotForward>& slots,
                           double tau, bool want_grads) {
    if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "prompt loss needs at least one example");
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "tau must be positive");
    const std::size_t S = slots.size();
    const std::size_t D = slots.front().text.size();
    BatchForward out;
    if (want_grads) out.grad_text.assign(S, Embedding(D, 0.0));
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    std::vector<double> logits(S);
    std::vector<double> probs;
    for (const auto& example : batch) {
        if (example.slot < 0 || static_cast<std::size_t>(example.slot) >= S) {
            throw Error(ErrorCode::InvalidLabel, "slot " + std::to_string(example.slot) + " out of range");
        }
        if (example.embedding.size() != D) throw Error(ErrorCode::DimensionMismatch, "batch embedding dimension");
        const Embedding z = l2_normalize(example.embedding);
        for (std::size_t c = 0; c < S; ++c) logits[c] = dot(z, slots[c].text) / tau;
        const double lse = softmax(logits, probs);
        out.loss += (lse - logits[example.slot]) * inv_batch;
        if (!want_grads) continue;
        for (std::size_t c = 0; c < S; ++c) {
            const double coeff = (probs[c] - (static_cast<Slot>(c) == example.slot ? 1.0 : 0.0)) / tau * inv_batch;
            auto& g = out.grad_text[c];
            for (std::size_t d = 0; d < D; ++d) g[d] += coeff * z[d];
        }
    }
    return out;
}

}  // namespace

void PromptVariant::validate() const {
    switch (kind) {
        case Kind::Mixed:
            if (global_tokens < 1 || local_tokens < 1) throw Error(ErrorCode::InvalidShape, "mixed needs >= 1 of each");
            break;
        case Kind::GlobalOnly:
            if (global_tokens < 1 || local_tokens != 0) throw Error(ErrorCode::InvalidShape, "global-only token counts");
            break;
        case Kind::LocalOnly:
            if (local_tokens < 1 || global_tokens != 0) throw Error(ErrorCode::InvalidShape, "local-only token counts");
            break;
    }
}

std::string_view to_string(PromptVariant::Kind kind) {
    switch (kind) {
        case PromptVariant::Kind::Mixed: return "mixed";
        case PromptVariant::Kind::GlobalOnly: return "global";
        case PromptVariant::Kind::LocalOnly: return "local";
    }
    return "unknown";
}

FrozenTextMixer FrozenTextMixer::make(std::vector<Embedding> anchors, std::uint64_t seed) {
    if (anchors.empty()) throw Error(ErrorCode::InvalidShape, "mixer needs anchors");
    const std::size_t D = anchors.front().size();
    Rng rng(seed);
    Matrix mix(D, D);
    // Modified Gram-Schmidt over Gaussian rows.
    for (std::size_t r = 0; r < D; ++r) {
        for (;;) {
            auto row = mix.row(r);
            for (double& x : row) x = rng.normal();
            for (std::size_t q = 0; q < r; ++q) {
                const double proj = dot(row, mix.row(q));
                const auto prev = mix.row(q);
                for (std::size_t c = 0; c < D; ++c) row[c] -= proj * prev[c];
            }
            const double n = norm(row);
            if (n > 1e-6) {
                for (double& x : row) x /= n;
                break;
            }
        }
    }
    return {std::move(mix), std::move(anchors)};
}

FrozenTextMixer FrozenTextMixer::identity(std::vector<Embedding> anchors) {
    if (anchors.empty()) throw Error(ErrorCode::InvalidShape, "mixer needs anchors");
    const std::size_t D = anchors.front().size();
    Matrix mix(D, D);
    for (std::size_t d = 0; d < D; ++d) mix(d, d) = 1.0;
    return {std::move(mix), std::move(anchors)};
}

OptimizerState OptimizerState::zeros_like(const PromptBank& bank) {
    OptimizerState state;
    const auto D = static_cast<std::size_t>(bank.dimension);
    state.global_momentum.assign(bank.num_slots, Matrix(bank.global_tokens, D));
    state.local_momentum.assign(bank.num_slots, Matrix(bank.local_tokens, D));
    return state;
}

PromptBank init_prompt_bank(const PromptVariant& variant, int num_classes, int dimension, int num_clients,
                            std::uint64_t seed) {
    if (num_classes < 2 || dimension < 2 || num_clients < 1) {
        throw Error(ErrorCode::InvalidShape, "prompt bank needs C >= 2, D >= 2, K >= 1");
    }
    variant.validate();
    PromptBank bank;
    bank.num_slots = num_classes + 1;
    bank.dimension = dimension;
    bank.global_tokens = variant.global_tokens;
    bank.local_tokens = variant.local_tokens;
    const auto D = static_cast<std::size_t>(dimension);
    Rng rng(seed);
    for (int c = 0; c < bank.num_slots; ++c) {
        Matrix m(variant.global_tokens, D);
        for (double& x : m.values()) x = kInitStd * rng.normal();
        bank.global.push_back(std::move(m));
    }
    bank.local.resize(num_clients);
    for (int k = 0; k < num_clients; ++k) {
        for (int c = 0; c < bank.num_slots; ++c) {
            Matrix m(variant.local_tokens, D);
            for (double& x : m.values()) x = kInitStd * rng.normal();
            bank.local[k].push_back(std::move(m));
        }
    }
    return bank;
}

Embedding encode_class(const PromptBank& bank, const FrozenTextMixer& mixer, int client, Slot slot) {
    check_compatible(bank, mixer);
    check_client(bank, client);
    if (slot < 0 || slot >= bank.num_slots) throw Error(ErrorCode::InvalidLabel, "slot out of range");
    return forward_slot(bank, mixer, client, slot).text;
}

std::vector<Embedding> encode_all(const PromptBank& bank, const FrozenTextMixer& mixer, int client) {
    std::vector<Embedding> texts;
    texts.reserve(bank.num_slots);
    for (Slot c = 0; c < bank.num_slots; ++c) texts.push_back(encode_class(bank, mixer, client, c));
    return texts;
}

std::vector<double> class_probabilities(std::span<const double> z, std::span<const Embedding> texts, double tau) {
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "tau must be positive");
    if (texts.empty()) throw Error(ErrorCode::InvalidShape, "no text embeddings");
    const Embedding zn = l2_normalize(z);
    std::vector<double> logits(texts.size());
    for (std::size_t c = 0; c < texts.size(); ++c) {
        if (texts[c].size() != zn.size()) throw Error(ErrorCode::DimensionMismatch, "text embedding dimension");
        logits[c] = dot(zn, l2_normalize(texts[c])) / tau;
    }
    std::vector<double> probs;
    softmax(logits, probs);
    return probs;
}

LossAndGrads prompt_loss_and_grads(std::span<const LabeledEmbedding> batch, const PromptBank& bank,
                                   const FrozenTextMixer& mixer, int client, double tau) {
    check_compatible(bank, mixer);
    check_client(bank, client);
    std::vector<SlotForward> slots;
    slots.reserve(bank.num_slots);
    for (Slot c = 0; c < bank.num_slots; ++c) slots.push_back(forward_slot(bank, mixer, client, c));
    auto fwd = batch_forward(batch, slots, tau, true);

    const auto D = static_cast<std::size_t>(bank.dimension);
    const double row_share = 1.0 / static_cast<double>(bank.global_tokens + bank.local_tokens);
    LossAndGrads out;
    out.loss = fwd.loss;
    out.grads.global.reserve(bank.num_slots);
    out.grads.local.reserve(bank.num_slots);
    for (Slot c = 0; c < bank.num_slots; ++c) {
        const auto& t = slots[c].text;
        const auto& gt = fwd.grad_text[c];
        // Through normalization: (I - t t^T) / ||v||.
        const double along = dot(t, gt);
        Embedding gv(D);
        for (std::size_t d = 0; d < D; ++d) gv[d] = (gt[d] - t[d] * along) / slots[c].pre_norm;
        auto gu = multiply_transposed(mixer.mix, gv);
        for (double& x : gu) x *= row_share;

        Matrix g(bank.global_tokens, D);
        for (std::size_t r = 0; r < g.rows(); ++r) std::copy(gu.begin(), gu.end(), g.row(r).begin());
        Matrix l(bank.local_tokens, D);
        for (std::size_t r = 0; r < l.rows(); ++r) std::copy(gu.begin(), gu.end(), l.row(r).begin());
        out.grads.global.push_back(std::move(g));
        out.grads.local.push_back(std::move(l));
    }
    return out;
}

double prompt_loss(std::span<const LabeledEmbedding> batch, const PromptBank& bank, const FrozenTextMixer& mixer,
                   int client, double tau) {
    check_compatible(bank, mixer);
    check_client(bank, client);
    std::vector<SlotForward> slots;
    for (Slot c = 0; c < bank.num_slots; ++c) slots.push_back(forward_slot(bank, mixer, client, c));
    return batch_forward(batch, slots, tau, false).loss;
}

void sgd_momentum_step(std::span<Matrix> params, std::span<const Matrix> grads, std::span<Matrix> buffers,
                       double lr, double momentum, double weight_decay) {
    if (params.size() != grads.size() || params.size() != buffers.size()) {
        throw Error(ErrorCode::ShapeMismatch, "parameter, gradient and buffer counts differ");
    }
    if (!(lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].same_shape(grads[i]) || !params[i].same_shape(buffers[i])) {
            throw Error(ErrorCode::ShapeMismatch, "tensor " + std::to_string(i) + " shape differs");
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values();
        const auto g = grads[i].values();
        auto b = buffers[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double step = g[j] + weight_decay * p[j];
            b[j] = momentum * b[j] + step;
            p[j] -= lr * b[j];
        }
    }
}

void sgd_momentum_step(PromptBank& bank, int client, const PromptGrads& grads, OptimizerState& state, double lr,
                       double momentum, double weight_decay) {
    check_client(bank, client);
    sgd_momentum_step(bank.global, grads.global, state.global_momentum, lr, momentum, weight_decay);
    if (!bank.local.empty()) {
        sgd_momentum_step(bank.local[client], grads.local, state.local_momentum, lr, momentum, weight_decay);
    }
    ++state.steps;
}

std::vector<LabeledEmbedding> balanced_subsample(std::span<const LabeledEmbedding> labeled, int num_slots, int cap,
                                                 Rng& rng, int per_slot_cap) {
    std::vector<std::vector<std::size_t>> by_slot(static_cast<std::size_t>(num_slots));
    for (std::size_t i = 0; i < labeled.size(); ++i) {
        const Slot s = labeled[i].slot;
        if (s < 0 || s >= num_slots) throw Error(ErrorCode::InvalidLabel, "slot out of range");
        by_slot[s].push_back(i);
    }
    std::size_t available = 0;
    for (auto& bucket : by_slot) {
        rng.shuffle(std::span<std::size_t>(bucket));
        bucket.resize(std::min(bucket.size(), static_cast<std::size_t>(std::max(per_slot_cap, 0))));
        available += bucket.size();
    }
    std::vector<LabeledEmbedding> out;
    const std::size_t limit = std::min<std::size_t>(available, static_cast<std::size_t>(std::max(cap, 0)));
    out.reserve(limit);
    for (std::size_t depth = 0; out.size() < limit; ++depth) {
        for (const auto& bucket : by_slot) {
            if (out.size() >= limit) break;
            if (depth < bucket.size()) out.push_back(labeled[bucket[depth]]);
        }
    }
    return out;
}

PromptTrainResult train_prompts(PromptBank& bank, const FrozenTextMixer& mixer, int client,
                                std::span<const LabeledEmbedding> labeled, const PromptHyper& hyper, Rng& rng) {
    if (labeled.empty()) throw Error(ErrorCode::EmptyBatch, "no labeled examples for prompt training");
    if (hyper.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    PromptTrainResult result;
    if (hyper.epochs <= 0) return result;

    auto subset = balanced_subsample(labeled, bank.num_slots, std::numeric_limits<int>::max(), rng, hyper.shot_cap);
    result.samples_used = static_cast<int>(subset.size());
    if (subset.empty()) return result;
    auto state = OptimizerState::zeros_like(bank);
    const auto batch = static_cast<std::size_t>(hyper.batch_size);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(std::span<LabeledEmbedding>(subset));
        double total = 0.0;
        for (std::size_t start = 0; start < subset.size(); start += batch) {
            const std::size_t count = std::min(batch, subset.size() - start);
            const std::span<const LabeledEmbedding> chunk(subset.data() + start, count);
            auto lg = prompt_loss_and_grads(chunk, bank, mixer, client, hyper.tau);
            total += lg.loss * static_cast<double>(count);
            sgd_momentum_step(bank, client, lg.grads, state, hyper.lr, hyper.momentum, hyper.weight_decay);
        }
        result.loss_per_epoch.push_back(total / static_cast<double>(subset.size()));
    }
    return result;
}

namespace {

constexpr char kBankMagic[8] = {'P', 'G', 'B', 'A', 'N', 'K', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::ParseError, "truncated bank header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::ParseError, "truncated bank payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void save_prompt_bank(std::ostream& out, const PromptBank& bank) {
    out.write(kBankMagic, sizeof kBankMagic);
    put_u32(out, static_cast<std::uint32_t>(bank.num_slots));
    put_u32(out, static_cast<std::uint32_t>(bank.global_tokens));
    put_u32(out, static_cast<std::uint32_t>(bank.local_tokens));
    put_u32(out, static_cast<std::uint32_t>(bank.dimension));
    put_u32(out, static_cast<std::uint32_t>(bank.num_clients()));
    for (const auto& m : bank.global) {
        for (double v : m.values()) put_f64(out, v);
    }
    for (const auto& client : bank.local) {
        for (const auto& m : client) {
            for (double v : m.values()) put_f64(out, v);
        }
    }
}

PromptBank load_prompt_bank(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kBankMagic, 8) != 0) {
        throw Error(ErrorCode::ParseError, "not a prompt bank checkpoint");
    }
    PromptBank bank;
    bank.num_slots = static_cast<int>(get_u32(in));
    bank.global_tokens = static_cast<int>(get_u32(in));
    bank.local_tokens = static_cast<int>(get_u32(in));
    bank.dimension = static_cast<int>(get_u32(in));
    const auto clients = static_cast<int>(get_u32(in));
    const auto D = static_cast<std::size_t>(bank.dimension);
    for (int c = 0; c < bank.num_slots; ++c) {
        Matrix m(bank.global_tokens, D);
        for (double& v : m.values()) v = get_f64(in);
        bank.global.push_back(std::move(m));
    }
    bank.local.resize(clients);
    for (int k = 0; k < clients; ++k) {
        for (int c = 0; c < bank.num_slots; ++c) {
            Matrix m(bank.local_tokens, D);
            for (double& v : m.values()) v = get_f64(in);
            bank.local[k].push_back(std::move(m));
        }
    }
    return bank;
}

void save_prompt_bank(const std::filesystem::path& path, const PromptBank& bank) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    save_prompt_bank(out, bank);
}

PromptBank load_prompt_bank(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return load_prompt_bank(in);
}

}  // namespace promptgate
