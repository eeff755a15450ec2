#include "promptgate/synthetic.hpp"

#include <cmath>
#include <string>

#include "promptgate/error.hpp"
#include "promptgate/linalg.hpp"
#include "promptgate/rng.hpp"

namespace promptgate {

namespace {

Embedding random_unit(Rng& rng, int dimension) {
    for (;;) {
        Embedding v(dimension);
        for (double& x : v) x = rng.normal();
        if (norm(v) > 1e-6) return l2_normalize(v);
    }
}

// Orthonormal directions by Gram-Schmidt; once the space is exhausted the
// remaining directions are plain random unit vectors.
std::vector<Embedding> basis_directions(Rng& rng, int count, int dimension) {
    std::vector<Embedding> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        if (i >= dimension) {
            out.push_back(random_unit(rng, dimension));
            continue;
        }
        for (;;) {
            Embedding v = random_unit(rng, dimension);
            for (const auto& q : out) {
                const double proj = dot(v, q);
                for (int d = 0; d < dimension; ++d) v[d] -= proj * q[d];
            }
            if (norm(v) > 1e-3) {
                out.push_back(l2_normalize(v));
                break;
            }
        }
    }
    return out;
}

std::vector<Embedding> id_centroids(Rng& rng, const SyntheticSpec& spec) {
    const double radius = spec.mean_separation / std::sqrt(2.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        auto dirs = basis_directions(rng, spec.num_classes, spec.dimension);
        bool separated = true;
        for (int a = 0; a < spec.num_classes && separated; ++a) {
            for (int b = a + 1; b < spec.num_classes; ++b) {
                if (std::sqrt(squared_distance(dirs[a], dirs[b])) * radius < spec.mean_separation - 1e-9) {
                    separated = false;
                    break;
                }
            }
        }
        if (!separated) continue;
        for (auto& d : dirs) {
            for (double& x : d) x *= radius;
        }
        return dirs;
    }
    throw Error(ErrorCode::InvalidSpec, "cannot place class centroids at the requested separation");
}

Embedding draw(Rng& rng, const Embedding& centre, const Embedding& shift, double stddev) {
    Embedding x(centre.size());
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = centre[d] + shift[d] + stddev * rng.normal();
    return l2_normalize(x);
}

std::size_t categorical(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

}  // namespace

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
    if (num_clients < 1) fail("num_clients must be >= 1");
    if (num_classes < 2) fail("num_classes must be >= 2");
    if (num_ood_modes < 1) fail("num_ood_modes must be >= 1");
    if (dimension < 2) fail("dimension must be >= 2");
    if (!(mean_separation > 0.0)) fail("mean_separation must be positive");
    if (within_class_std < 0.0 || ood_std < 0.0 || client_shift < 0.0) fail("negative spread");
    if (ood_id_affinity < 0.0 || ood_id_affinity >= 1.0) fail("ood_id_affinity must lie in [0, 1)");
    if (seed_labeled_per_class < 0 || unlabeled_per_client < 0 || test_per_client < 0) {
        fail("negative sample count");
    }
    if (ood_ratio.size() != static_cast<std::size_t>(num_clients)) {
        fail("ood_ratio needs one entry per client");
    }
    for (double r : ood_ratio) {
        if (r < 0.0 || r > 1.0) fail("ood_ratio entries must lie in [0, 1]");
    }
    if (test_ood_ratio > 1.0) fail("test_ood_ratio must be <= 1");
    if (template_misalignment < 0.0 || template_misalignment > 1.0) {
        fail("template_misalignment must lie in [0, 1]");
    }
}

FederatedDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int C = spec.num_classes;
    const int M = spec.num_ood_modes;
    const int D = spec.dimension;
    const double radius = spec.mean_separation / std::sqrt(2.0);

    Rng geometry(derive_seed(seed, Stream::Dataset, 0));
    const auto class_means = id_centroids(geometry, spec);
    std::vector<Embedding> class_dirs;
    for (const auto& mu : class_means) class_dirs.push_back(l2_normalize(mu));

    // OOD-only directions orthogonal to the class span where D allows it.
    std::vector<Embedding> ood_dirs;
    {
        auto all = class_dirs;
        for (int m = 0; m < M; ++m) {
            Embedding v = random_unit(geometry, D);
            if (static_cast<int>(all.size()) < D) {
                for (const auto& q : all) {
                    const double proj = dot(v, q);
                    for (int d = 0; d < D; ++d) v[d] -= proj * q[d];
                }
                if (norm(v) < 1e-3) v = random_unit(geometry, D);
            }
            v = l2_normalize(v);
            all.push_back(v);
            ood_dirs.push_back(std::move(v));
        }
    }
    const double lambda = spec.ood_id_affinity;
    const double orth = std::sqrt(1.0 - lambda * lambda);
    std::vector<Embedding> ood_means(M, Embedding(D));
    for (int m = 0; m < M; ++m) {
        const auto& q = class_dirs[m % C];
        for (int d = 0; d < D; ++d) ood_means[m][d] = radius * (lambda * q[d] + orth * ood_dirs[m][d]);
    }

    FederatedDataset out;
    out.num_classes = C;
    out.num_ood_modes = M;
    out.dimension = D;

    std::int64_t next_id = 0;
    for (int k = 0; k < spec.num_clients; ++k) {
        Rng rng(derive_seed(seed, Stream::Dataset, 1, k));
        Embedding shift = random_unit(rng, D);
        for (double& x : shift) x *= spec.client_shift;

        std::vector<double> mode_weights(M, 0.0);
        if (spec.exclusive_ood_modes) {
            bool any = false;
            for (int m = 0; m < M; ++m) {
                if (m % spec.num_clients == k) {
                    mode_weights[m] = 1.0;
                    any = true;
                }
            }
            if (!any) mode_weights[k % M] = 1.0;
        } else {
            for (double& w : mode_weights) w = 0.5 + rng.uniform();
        }

        ClientDataset client;
        client.client_id = k;
        auto make = [&](GroundTruth truth, Split split) {
            Sample s;
            s.sample_id = next_id++;
            s.client_id = k;
            s.truth = truth;
            s.split = split;
            s.embedding = truth.is_id() ? draw(rng, class_means[truth.index], shift, spec.within_class_std)
                                        : draw(rng, ood_means[truth.index], shift, spec.ood_std);
            return s;
        };
        auto fill_mixed = [&](std::vector<Sample>& dst, int n, double ratio, Split split) {
            const auto n_ood = static_cast<std::size_t>(std::llround(ratio * n));
            std::vector<char> is_ood(static_cast<std::size_t>(n), 0);
            for (std::size_t i = 0; i < n_ood; ++i) is_ood[i] = 1;
            rng.shuffle(std::span<char>(is_ood));
            dst.reserve(static_cast<std::size_t>(n));
            for (char flag : is_ood) {
                const GroundTruth truth =
                    flag ? GroundTruth::ood(static_cast<int>(categorical(rng, mode_weights)))
                         : GroundTruth::id(static_cast<int>(rng.index(static_cast<std::size_t>(C))));
                dst.push_back(make(truth, split));
            }
        };

        for (int c = 0; c < C; ++c) {
            for (int i = 0; i < spec.seed_labeled_per_class; ++i) {
                client.labeled.push_back(make(GroundTruth::id(c), Split::SeedLabeled));
            }
        }
        fill_mixed(client.unlabeled, spec.unlabeled_per_client, spec.ood_ratio[k], Split::Unlabeled);
        const double test_ratio = spec.test_ood_ratio < 0.0 ? spec.ood_ratio[k] : spec.test_ood_ratio;
        fill_mixed(client.test, spec.test_per_client, test_ratio, Split::Test);
        out.clients.push_back(std::move(client));
    }

    // Zero-shot text anchors: each true direction rotated by misalignment * 90
    // degrees towards a seeded random orthogonal direction.
    Rng anchor_rng(derive_seed(seed, Stream::Dataset, 2));
    const double angle = spec.template_misalignment * std::acos(0.0);
    auto tilt = [&](const Embedding& dir) {
        Embedding r = random_unit(anchor_rng, D);
        const double proj = dot(r, dir);
        for (int d = 0; d < D; ++d) r[d] -= proj * dir[d];
        r = l2_normalize(r);
        Embedding v(D);
        for (int d = 0; d < D; ++d) v[d] = std::cos(angle) * dir[d] + std::sin(angle) * r[d];
        return l2_normalize(v);
    };
    for (int c = 0; c < C; ++c) out.anchors.push_back(tilt(class_dirs[c]));
    {
        Embedding mean(D, 0.0);
        for (const auto& nu : ood_means) {
            for (int d = 0; d < D; ++d) mean[d] += nu[d] / M;
        }
        out.anchors.push_back(tilt(l2_normalize(mean)));
    }
    return out;
}

}  // namespace promptgate
