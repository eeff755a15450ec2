#include "promptgate/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "promptgate/error.hpp"
#include "promptgate/linalg.hpp"

namespace promptgate {

namespace {

std::vector<const Sample*> sorted_by_id(std::span<const Sample> pool) {
    std::vector<const Sample*> out;
    out.reserve(pool.size());
    for (const auto& s : pool) out.push_back(&s);
    std::sort(out.begin(), out.end(), [](const Sample* a, const Sample* b) { return a->sample_id < b->sample_id; });
    return out;
}

std::vector<Sample> collect_sorted(std::vector<const Sample*> picked) {
    std::sort(picked.begin(), picked.end(), [](const Sample* a, const Sample* b) { return a->sample_id < b->sample_id; });
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    std::vector<Sample> out;
    out.reserve(picked.size());
    for (const auto* s : picked) out.push_back(*s);
    return out;
}

}  // namespace

std::string to_string(const StrategyKind& kind) {
    switch (kind.kind) {
        case StrategyKind::Kind::Random: return "random";
        case StrategyKind::Kind::Entropy: return "entropy";
        case StrategyKind::Kind::KMeansDiverse: return "kmeans";
    }
    return "unknown";
}

StrategyKind parse_strategy(std::string_view name) {
    if (name == "random") return StrategyKind::random();
    if (name == "entropy") return StrategyKind::entropy();
    if (name == "kmeans") return StrategyKind::kmeans();
    throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + std::string(name) + "'");
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

std::vector<Sample> select_random(std::span<const Sample> pool, int budget, Rng& rng) {
    auto ordered = sorted_by_id(pool);
    const std::size_t take = std::min<std::size_t>(ordered.size(), static_cast<std::size_t>(std::max(budget, 0)));
    if (take == ordered.size()) return collect_sorted(std::move(ordered));
    // Partial Fisher-Yates over the canonical order.
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + rng.index(ordered.size() - i);
        std::swap(ordered[i], ordered[j]);
    }
    ordered.resize(take);
    return collect_sorted(std::move(ordered));
}

std::vector<Sample> select_entropy(std::span<const Sample> pool, const LinearProbe& model, int budget) {
    if (!model.trained) throw Error(ErrorCode::UntrainedModel, "entropy acquisition needs a trained probe");
    struct Scored {
        double h;
        const Sample* s;
    };
    std::vector<Scored> scored;
    scored.reserve(pool.size());
    for (const auto& s : pool) scored.push_back({entropy(predict_probs(model, s.embedding)), &s});
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.h != b.h) return a.h > b.h;
        return a.s->sample_id < b.s->sample_id;
    });
    const std::size_t take = std::min<std::size_t>(scored.size(), static_cast<std::size_t>(std::max(budget, 0)));
    std::vector<Sample> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(*scored[i].s);
    return out;
}

std::vector<Sample> select_kmeans(std::span<const Sample> pool, int budget, Rng& rng, int max_iters) {
    if (budget <= 0 || pool.empty()) return {};
    const auto points = sorted_by_id(pool);
    const std::size_t n = points.size();
    const std::size_t dim = points.front()->embedding.size();
    const std::size_t k_target = std::min<std::size_t>(n, static_cast<std::size_t>(budget));
    if (k_target == n) return collect_sorted(points);

    auto dist = [&](std::size_t i, const std::vector<double>& centre) {
        return squared_distance(points[i]->embedding, centre);
    };

    // k-means++ seeding; stops early when every point coincides with a centre.
    std::vector<std::vector<double>> centres;
    centres.push_back(points[rng.index(n)]->embedding);
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = dist(i, centres[0]);
    while (centres.size() < k_target) {
        double total = 0.0;
        for (double d : nearest) total += d;
        if (total <= 0.0) break;
        double u = rng.uniform() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (u < nearest[i]) {
                pick = i;
                break;
            }
            u -= nearest[i];
        }
        while (nearest[pick] <= 0.0 && pick > 0) --pick;
        centres.push_back(points[pick]->embedding);
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist(i, centres.back()));
    }
    const std::size_t k = centres.size();

    std::vector<std::size_t> assign(n, std::numeric_limits<std::size_t>::max());
    auto assign_all = [&]() {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = dist(i, centres[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = dist(i, centres[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        return changed;
    };

    assign_all();
    for (int iter = 0; iter < std::max(max_iters, 1); ++iter) {
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& sum = sums[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) sum[d] += points[i]->embedding[d];
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) centres[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            // Reseed at the point farthest from its own centroid.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = dist(i, centres[assign[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            centres[c] = points[far]->embedding;
            assign[far] = c;
        }
        if (!assign_all()) break;
    }

    std::vector<const Sample*> picked;
    for (std::size_t c = 0; c < k; ++c) {
        const Sample* best = nullptr;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != c) continue;
            const double d = dist(i, centres[c]);
            if (d < best_d) {  // points are in id order, so ties keep the lower id
                best_d = d;
                best = points[i];
            }
        }
        if (best != nullptr) picked.push_back(best);
    }
    return collect_sorted(std::move(picked));
}

std::vector<Sample> select(const StrategyKind& kind, const AcquisitionInput& input, int budget, Rng& rng) {
    switch (kind.kind) {
        case StrategyKind::Kind::Random: return select_random(input.gated, budget, rng);
        case StrategyKind::Kind::Entropy:
            if (input.model == nullptr) throw Error(ErrorCode::UntrainedModel, "entropy acquisition needs a probe");
            return select_entropy(input.gated, *input.model, budget);
        case StrategyKind::Kind::KMeansDiverse: return select_kmeans(input.gated, budget, rng, kind.max_iters);
    }
    return {};
}

}  // namespace promptgate
