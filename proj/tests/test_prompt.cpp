#include <cmath>
#include <sstream>

#include "doctest.h"
#include "promptgate/error.hpp"
#include "promptgate/prompt.hpp"
#include "support.hpp"

using namespace promptgate;
using namespace testsupport;

TEST_CASE("mixed bank shape") {
    const auto bank = init_prompt_bank(PromptVariant::mixed(), 8, 64, 4, 1);
    CHECK(bank.num_slots == 9);
    REQUIRE(bank.global.size() == 9u);
    for (const auto& m : bank.global) {
        CHECK(m.rows() == 8u);
        CHECK(m.cols() == 64u);
    }
    REQUIRE(bank.local.size() == 4u);
    for (const auto& per_client : bank.local) {
        REQUIRE(per_client.size() == 9u);
        for (const auto& m : per_client) CHECK(m.rows() == 8u);
    }
}

TEST_CASE("global-only bank has empty local tokens and is seed deterministic") {
    const auto bank = init_prompt_bank(PromptVariant::global_only(), 4, 16, 3, 5);
    for (const auto& per_client : bank.local) {
        for (const auto& m : per_client) CHECK(m.rows() == 0u);
    }
    CHECK(bank == init_prompt_bank(PromptVariant::global_only(), 4, 16, 3, 5));
    CHECK_FALSE(bank == init_prompt_bank(PromptVariant::global_only(), 4, 16, 3, 6));
}

TEST_CASE("zero context with identity mixer gives the anchor") {
    Rng rng(1);
    std::vector<Embedding> anchors;
    for (int c = 0; c < 4; ++c) anchors.push_back(random_unit(rng, 6));
    const auto mixer = FrozenTextMixer::identity(anchors);
    auto bank = init_prompt_bank(PromptVariant::mixed(), 3, 6, 2, 1);
    for (auto& m : bank.global) m = Matrix(m.rows(), m.cols());
    for (auto& pc : bank.local) {
        for (auto& m : pc) m = Matrix(m.rows(), m.cols());
    }
    for (int c = 0; c < 4; ++c) {
        const auto t = encode_class(bank, mixer, 1, c);
        for (int d = 0; d < 6; ++d) CHECK(t[d] == doctest::Approx(anchors[c][d]).epsilon(1e-15));
    }
}

TEST_CASE("mixer is orthogonal") {
    Rng rng(2);
    const auto mixer = random_mixer(rng, 3, 12);
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
            double acc = 0.0;
            for (int r = 0; r < 12; ++r) acc += mixer.mix(r, i) * mixer.mix(r, j);
            CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("global-only text embeddings do not depend on the client") {
    Rng rng(3);
    const auto bank = random_bank(rng, PromptVariant::global_only(), 3, 8, 3, 0.5);
    const auto mixer = random_mixer(rng, 3, 8);
    CHECK(encode_all(bank, mixer, 0) == encode_all(bank, mixer, 2));
}

TEST_CASE("encode_class matches a straight-line recomputation") {
    Rng rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto bank = random_bank(rng, PromptVariant::mixed(), 3, 4, 2, 0.7);
        const auto mixer = random_mixer(rng, 3, 4);
        for (int k = 0; k < 2; ++k) {
            for (int c = 0; c < 4; ++c) {
                const auto fast = encode_class(bank, mixer, k, c);
                const auto slow = naive_text(bank, mixer, k, c);
                for (int d = 0; d < 4; ++d) CHECK(std::abs(fast[d] - slow[d]) < 1e-12);
            }
        }
    }
}

TEST_CASE("class probabilities: ties, dominance and temperature limit") {
    Rng rng(5);
    const auto e = random_unit(rng, 5);
    const std::vector<Embedding> same(4, e);
    for (double p : class_probabilities(e, same, 0.07)) CHECK(p == doctest::Approx(0.25).epsilon(1e-14));

    std::vector<Embedding> basis;
    for (int i = 0; i < 4; ++i) {
        Embedding v(5, 0.0);
        v[i] = 1.0;
        basis.push_back(v);
    }
    CHECK(class_probabilities(basis[0], basis, 0.01)[0] > 0.999);
    // exp(100) / (exp(100) + 3): the dominant slot in closed form.
    CHECK(class_probabilities(basis[0], basis, 0.01)[0] ==
          doctest::Approx(1.0 / (1.0 + 3.0 * std::exp(-100.0))).epsilon(1e-14));
    for (double p : class_probabilities(basis[0], basis, 1e6)) CHECK(std::abs(p - 0.25) < 1e-5);
    CHECK_THROWS_AS(class_probabilities(basis[0], basis, 0.0), Error);
}

TEST_CASE("uniform prediction over 9 slots costs ln 9") {
    Rng rng(6);
    auto bank = init_prompt_bank(PromptVariant::mixed(), 8, 6, 1, 1);
    for (auto& m : bank.global) m = Matrix(m.rows(), m.cols());
    for (auto& m : bank.local[0]) m = Matrix(m.rows(), m.cols());
    const auto e = random_unit(rng, 6);
    const auto mixer = FrozenTextMixer::identity(std::vector<Embedding>(9, e));
    const std::vector<LabeledEmbedding> batch = {{random_unit(rng, 6), 3}};
    CHECK(prompt_loss(batch, bank, mixer, 0, 0.07) == doctest::Approx(std::log(9.0)).epsilon(1e-13));
}

TEST_CASE("analytic gradients agree with central differences") {
    Rng rng(7);
    for (const auto& variant : {PromptVariant::mixed(), PromptVariant::global_only(), PromptVariant::local_only()}) {
        const int C = 3, D = 8, K = 2;
        const auto bank = random_bank(rng, variant, C, D, K, 0.4);
        const auto mixer = random_mixer(rng, C, D);
        std::vector<LabeledEmbedding> batch;
        for (int i = 0; i < 6; ++i) batch.push_back({random_unit(rng, D), static_cast<int>(rng.index(C + 1))});
        const auto lg = prompt_loss_and_grads(batch, bank, mixer, 1, 0.5);
        CHECK(lg.loss == doctest::Approx(naive_loss(batch, bank, mixer, 1, 0.5)).epsilon(1e-12));
        const auto check = check_gradients(bank, mixer, 1, batch, 0.5, lg.grads, 1e-5, rng, 20);
        CHECK(check.coordinates == 20u);
        CHECK(check.max_rel_error < 1e-5);
    }
}

TEST_CASE("duplicating the batch leaves loss and gradients unchanged") {
    Rng rng(8);
    const auto bank = random_bank(rng, PromptVariant::mixed(), 3, 6, 2, 0.3);
    const auto mixer = random_mixer(rng, 3, 6);
    std::vector<LabeledEmbedding> batch;
    for (int i = 0; i < 5; ++i) batch.push_back({random_unit(rng, 6), i % 4});
    auto doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());
    const auto a = prompt_loss_and_grads(batch, bank, mixer, 0, 0.07);
    const auto b = prompt_loss_and_grads(doubled, bank, mixer, 0, 0.07);
    CHECK(std::abs(a.loss - b.loss) < 1e-12);
    for (std::size_t s = 0; s < a.grads.global.size(); ++s) {
        for (std::size_t i = 0; i < a.grads.global[s].size(); ++i) {
            CHECK(std::abs(a.grads.global[s].values()[i] - b.grads.global[s].values()[i]) < 1e-12);
        }
    }
}

TEST_CASE("empty batch and bad labels are rejected") {
    Rng rng(9);
    const auto bank = random_bank(rng, PromptVariant::mixed(), 3, 6, 2, 0.3);
    const auto mixer = random_mixer(rng, 3, 6);
    CHECK_THROWS_AS(prompt_loss_and_grads({}, bank, mixer, 0, 0.07), Error);
    const std::vector<LabeledEmbedding> bad = {{random_unit(rng, 6), 7}};
    CHECK_THROWS_AS(prompt_loss_and_grads(bad, bank, mixer, 0, 0.07), Error);
    const std::vector<LabeledEmbedding> ok = {{random_unit(rng, 6), 1}};
    CHECK_THROWS_AS(prompt_loss_and_grads(ok, bank, mixer, 0, -1.0), Error);
}

TEST_CASE("sgd step special cases") {
    std::vector<Matrix> p = {Matrix(1, 2, 1.0)};
    std::vector<Matrix> g = {Matrix(1, 2, 0.5)};
    std::vector<Matrix> buf = {Matrix(1, 2, 0.0)};
    sgd_momentum_step(p, g, buf, 0.1, 0.0, 0.0);
    CHECK(p[0](0, 0) == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));

    p = {Matrix(1, 2, 2.0)};
    g = {Matrix(1, 2, 0.0)};
    buf = {Matrix(1, 2, 0.0)};
    sgd_momentum_step(p, g, buf, 0.1, 0.9, 0.01);
    CHECK(p[0](0, 1) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)).epsilon(1e-15));

    // Constant gradient, two momentum steps: lr*g*(1 + (1 + 0.9)).
    p = {Matrix(1, 2, 0.0)};
    g = {Matrix(1, 2, 0.3)};
    buf = {Matrix(1, 2, 0.0)};
    sgd_momentum_step(p, g, buf, 0.01, 0.9, 0.0);
    sgd_momentum_step(p, g, buf, 0.01, 0.9, 0.0);
    CHECK(p[0](0, 0) == doctest::Approx(-0.01 * 0.3 * (1.0 + 1.9)).epsilon(1e-14));
}

TEST_CASE("balanced subsample caps per slot and round-robins") {
    Rng rng(10);
    std::vector<LabeledEmbedding> data;
    for (int i = 0; i < 30; ++i) data.push_back({Embedding{double(i), 1.0}, 0});
    for (int i = 0; i < 3; ++i) data.push_back({Embedding{double(i), 2.0}, 2});
    const auto capped = balanced_subsample(data, 3, 100, rng, 5);
    CHECK(capped.size() == 8u);
    const auto total = balanced_subsample(data, 3, 4, rng);
    int zeros = 0, twos = 0;
    for (const auto& e : total) (e.slot == 0 ? zeros : twos)++;
    CHECK(zeros == 2);
    CHECK(twos == 2);
}

TEST_CASE("training reduces the loss on separable data") {
    Rng rng(11);
    const int D = 4;
    std::vector<Embedding> anchors = {random_unit(rng, D), random_unit(rng, D), random_unit(rng, D)};
    const auto mixer = FrozenTextMixer::make(anchors, 3);
    auto bank = init_prompt_bank(PromptVariant::mixed(), 2, D, 1, 4);
    std::vector<LabeledEmbedding> data;
    for (int i = 0; i < 40; ++i) {
        Embedding z = {1.0 + 0.05 * rng.normal(), 0.05 * rng.normal(), 0.05 * rng.normal(), 0.0};
        Embedding w = {0.05 * rng.normal(), 1.0 + 0.05 * rng.normal(), 0.0, 0.05 * rng.normal()};
        data.push_back({z, 0});
        data.push_back({w, 1});
    }
    PromptHyper hyper;
    hyper.lr = 0.5;
    hyper.epochs = 40;
    const auto res = train_prompts(bank, mixer, 0, data, hyper, rng);
    REQUIRE(res.loss_per_epoch.size() == 40u);
    CHECK(res.loss_per_epoch.back() < 0.1 * res.loss_per_epoch.front());
}

TEST_CASE("zero epochs is a no-op and training is deterministic") {
    Rng rng(12);
    const auto mixer = random_mixer(rng, 2, 6);
    const auto start = init_prompt_bank(PromptVariant::mixed(), 2, 6, 2, 1);
    std::vector<LabeledEmbedding> data;
    for (int i = 0; i < 10; ++i) data.push_back({random_unit(rng, 6), i % 3});
    PromptHyper hyper;
    hyper.epochs = 0;
    auto bank = start;
    Rng r0(1);
    CHECK(train_prompts(bank, mixer, 0, data, hyper, r0).loss_per_epoch.empty());
    CHECK(bank == start);

    hyper.epochs = 3;
    auto a = start, b = start;
    Rng ra(5), rb(5);
    train_prompts(a, mixer, 1, data, hyper, ra);
    train_prompts(b, mixer, 1, data, hyper, rb);
    CHECK(a == b);
    CHECK(a.local[0] == start.local[0]);  // other clients' private tokens untouched
    CHECK_FALSE(a.local[1] == start.local[1]);
}

TEST_CASE("checkpoint round trip is exact") {
    Rng rng(13);
    const auto bank = random_bank(rng, PromptVariant::mixed(), 3, 5, 2, 0.2);
    std::stringstream io;
    save_prompt_bank(io, bank);
    CHECK(load_prompt_bank(io) == bank);
    std::stringstream junk("not a bank");
    CHECK_THROWS_AS(load_prompt_bank(junk), Error);
}

TEST_CASE("variant validation") {
    CHECK_THROWS_AS((PromptVariant{PromptVariant::Kind::Mixed, 0, 0}.validate()), Error);
    CHECK_NOTHROW(PromptVariant::local_only().validate());
}
