#pragma once

// Helpers shared by the unit and acceptance tests: random fixtures and
// straight-line reference implementations used as oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "promptgate/dataset.hpp"
#include "promptgate/linalg.hpp"
#include "promptgate/prompt.hpp"
#include "promptgate/rng.hpp"

namespace testsupport {

using namespace promptgate;

inline Embedding random_unit(Rng& rng, int d) {
    Embedding v(static_cast<std::size_t>(d));
    double n = 0.0;
    do {
        n = 0.0;
        for (double& x : v) {
            x = rng.normal();
            n += x * x;
        }
    } while (n < 1e-6);
    for (double& x : v) x /= std::sqrt(n);
    return v;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (double& x : m.values()) x = scale * rng.normal();
    return m;
}

/// A bank whose tokens are large enough that the text embeddings move well
/// away from the anchors, so gradients are far from trivial.
inline PromptBank random_bank(Rng& rng, const PromptVariant& variant, int C, int D, int K, double scale) {
    PromptBank bank = init_prompt_bank(variant, C, D, K, rng.next_u64());
    for (auto& m : bank.global) m = random_matrix(rng, m.rows(), m.cols(), scale);
    for (auto& per_client : bank.local) {
        for (auto& m : per_client) m = random_matrix(rng, m.rows(), m.cols(), scale);
    }
    return bank;
}

inline FrozenTextMixer random_mixer(Rng& rng, int C, int D) {
    std::vector<Embedding> anchors;
    for (int c = 0; c <= C; ++c) anchors.push_back(random_unit(rng, D));
    return FrozenTextMixer::make(anchors, rng.next_u64());
}

/// Naive forward pass: mean of stacked context rows, multiply, add anchor,
/// normalize; then cosine logits over tau and mean cross-entropy.
inline Embedding naive_text(const PromptBank& bank, const FrozenTextMixer& mixer, int client, int slot) {
    const int D = bank.dimension;
    std::vector<double> mean(static_cast<std::size_t>(D), 0.0);
    int rows = 0;
    const Matrix& g = bank.global[slot];
    for (std::size_t r = 0; r < g.rows(); ++r, ++rows) {
        for (int d = 0; d < D; ++d) mean[d] += g(r, d);
    }
    if (!bank.local.empty() && !bank.local[client].empty()) {
        const Matrix& l = bank.local[client][slot];
        for (std::size_t r = 0; r < l.rows(); ++r, ++rows) {
            for (int d = 0; d < D; ++d) mean[d] += l(r, d);
        }
    }
    if (rows > 0) {
        for (double& x : mean) x /= rows;
    }
    Embedding v(static_cast<std::size_t>(D), 0.0);
    for (int i = 0; i < D; ++i) {
        double acc = 0.0;
        for (int j = 0; j < D; ++j) acc += mixer.mix(i, j) * mean[j];
        v[i] = acc + mixer.anchors[slot][i];
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

inline double naive_loss(std::span<const LabeledEmbedding> batch, const PromptBank& bank,
                         const FrozenTextMixer& mixer, int client, double tau) {
    std::vector<Embedding> texts;
    for (int s = 0; s < bank.num_slots; ++s) texts.push_back(naive_text(bank, mixer, client, s));
    double total = 0.0;
    for (const auto& ex : batch) {
        double zn = 0.0;
        for (double x : ex.embedding) zn += x * x;
        zn = std::sqrt(zn);
        std::vector<double> logits;
        for (const auto& t : texts) {
            double c = 0.0;
            for (std::size_t d = 0; d < t.size(); ++d) c += ex.embedding[d] / zn * t[d];
            logits.push_back(c / tau);
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double l : logits) z += std::exp(l - mx);
        total += -(logits[ex.slot] - mx - std::log(z));
    }
    return total / static_cast<double>(batch.size());
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

inline double rel_error(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

/// Central differences of the naive loss over every trainable coordinate of
/// `client` (or `limit` randomly chosen ones when limit > 0).
inline GradCheck check_gradients(const PromptBank& bank, const FrozenTextMixer& mixer, int client,
                                 std::span<const LabeledEmbedding> batch, double tau, const PromptGrads& grads,
                                 double h, Rng& rng, std::size_t limit = 0) {
    struct Coord {
        bool global;
        int slot;
        std::size_t index;
    };
    std::vector<Coord> coords;
    for (int s = 0; s < bank.num_slots; ++s) {
        for (std::size_t i = 0; i < bank.global[s].size(); ++i) coords.push_back({true, s, i});
        if (!bank.local.empty()) {
            for (std::size_t i = 0; i < bank.local[client][s].size(); ++i) coords.push_back({false, s, i});
        }
    }
    if (limit > 0 && limit < coords.size()) {
        rng.shuffle(std::span<Coord>(coords));
        coords.resize(limit);
    }
    GradCheck out;
    PromptBank work = bank;
    for (const auto& c : coords) {
        double& p = c.global ? work.global[c.slot].values()[c.index] : work.local[client][c.slot].values()[c.index];
        const double saved = p;
        p = saved + h;
        const double up = naive_loss(batch, work, mixer, client, tau);
        p = saved - h;
        const double down = naive_loss(batch, work, mixer, client, tau);
        p = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic =
            c.global ? grads.global[c.slot].values()[c.index] : grads.local[c.slot].values()[c.index];
        out.max_rel_error = std::max(out.max_rel_error, rel_error(analytic, numeric));
        ++out.coordinates;
    }
    return out;
}

/// Random pool of `n` samples with sequential ids starting at `first_id`.
inline std::vector<Sample> random_pool(Rng& rng, int n, int C, int M, int D, double ood_fraction,
                                       std::int64_t first_id = 0) {
    std::vector<Sample> pool;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.sample_id = first_id + i;
        s.embedding = random_unit(rng, D);
        s.truth = rng.uniform() < ood_fraction ? GroundTruth::ood(static_cast<int>(rng.index(M)))
                                               : GroundTruth::id(static_cast<int>(rng.index(C)));
        pool.push_back(std::move(s));
    }
    return pool;
}

inline std::vector<std::int64_t> ids_of(std::span<const Sample> samples) {
    std::vector<std::int64_t> out;
    for (const auto& s : samples) out.push_back(s.sample_id);
    return out;
}

}  // namespace testsupport
