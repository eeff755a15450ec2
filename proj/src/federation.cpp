#include "promptgate/federation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <fstream>
#include <numeric>
#include <thread>

#include "promptgate/embedding_io.hpp"
#include "promptgate/error.hpp"
#include "promptgate/report.hpp"

namespace promptgate {

namespace {

// Largest-remainder split of `total` proportional to `weights`, never
// exceeding `caps`. Requires total <= sum(caps) and caps[k] == 0 => weights[k] == 0.
std::vector<int> proportional_split(std::int64_t total, std::span<const std::int64_t> weights,
                                    std::span<const std::int64_t> caps) {
    std::vector<int> out(weights.size(), 0);
    const std::int64_t sum = std::accumulate(weights.begin(), weights.end(), std::int64_t{0});
    if (total <= 0 || sum <= 0) return out;
    std::vector<std::int64_t> remainder(weights.size(), 0);
    std::int64_t assigned = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const std::int64_t scaled = total * weights[k];
        out[k] = static_cast<int>(std::min(scaled / sum, caps[k]));
        remainder[k] = scaled % sum;
        assigned += out[k];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    while (assigned < total) {
        bool progressed = false;
        for (std::size_t k : order) {
            if (assigned >= total) break;
            if (out[k] < caps[k]) {
                ++out[k];
                ++assigned;
                progressed = true;
            }
        }
        if (!progressed) break;
    }
    return out;
}

std::vector<LabeledEmbedding> as_probe_examples(std::span<const Sample> labeled) {
    std::vector<LabeledEmbedding> out;
    out.reserve(labeled.size());
    for (const auto& s : labeled) out.push_back({s.embedding, s.truth.index});
    return out;
}

void erase_ids(std::vector<Sample>& pool, std::vector<std::int64_t> ids) {
    std::sort(ids.begin(), ids.end());
    std::erase_if(pool, [&](const Sample& s) { return std::binary_search(ids.begin(), ids.end(), s.sample_id); });
}

bool same_token_shapes(std::span<const Matrix> a, std::span<const Matrix> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].same_shape(b[i])) return false;
    }
    return true;
}


}  // namespace

void ExperimentConfig::validate(int num_clients) const {
    if (rounds < 1) throw Error(ErrorCode::InvalidConfig, "rounds must be >= 1");
    if (budget < num_clients) {
        throw Error(ErrorCode::InvalidConfig, "budget must be at least the number of clients");
    }
    if (!(prompt.tau > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "tau must be positive");
    if (!(prompt.lr > 0.0) || !(probe.lr > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rates must be positive");
    if (prompt.epochs < 0 || probe.epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
    if (prompt.batch_size < 1 || probe.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch sizes must be >= 1");
    if (prompt.shot_cap < 1) throw Error(ErrorCode::InvalidConfig, "shot_cap must be >= 1");
    if (warmup_shots < 0) throw Error(ErrorCode::InvalidConfig, "warmup_shots must be >= 0");
    if (client_threads < 0) throw Error(ErrorCode::InvalidConfig, "client_threads must be >= 0");
    if (strategy.max_iters < 1) throw Error(ErrorCode::InvalidConfig, "kmeans max_iters must be >= 1");
    if (const auto* s = std::get_if<StaticZeroShot>(&gate); s && s->num_ood_templates < 1) {
        throw Error(ErrorCode::InvalidConfig, "num_ood_templates must be >= 1");
    }
    if (const auto* d = std::get_if<DynamicPromptGate>(&gate)) d->variant.validate();
}

std::vector<int> split_budget(int total, std::span<const int> pool_sizes) {
    std::vector<int> out(pool_sizes.size(), 0);
    std::int64_t capacity = 0;
    int nonempty = 0;
    for (int p : pool_sizes) {
        capacity += std::max(p, 0);
        nonempty += p > 0 ? 1 : 0;
    }
    std::int64_t remaining = std::min<std::int64_t>(std::max(total, 0), capacity);
    if (remaining == 0) return out;
    // Every client with data gets one query first when the budget allows it.
    if (remaining >= nonempty) {
        for (std::size_t k = 0; k < pool_sizes.size(); ++k) {
            if (pool_sizes[k] > 0) out[k] = 1;
        }
        remaining -= nonempty;
    }
    std::vector<std::int64_t> caps(pool_sizes.size());
    for (std::size_t k = 0; k < pool_sizes.size(); ++k) caps[k] = std::max(pool_sizes[k], 0) - out[k];
    const auto extra = proportional_split(remaining, caps, caps);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += extra[k];
    return out;
}

Slot oracle_label(const Sample& sample, int num_classes) {
    return sample.truth.is_id() ? sample.truth.index : ood_slot(num_classes);
}

std::vector<Matrix> fedavg_prompts(std::span<const ClientUpdateMsg> updates, PromptAggregation aggregation) {
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& u : updates) {
        const double w = aggregation == PromptAggregation::Weighted ? static_cast<double>(u.prompt_samples)
                                                                     : (u.prompt_samples > 0 ? 1.0 : 0.0);
        weights.push_back(std::max(w, 0.0));
        total += weights.back();
    }
    if (!(total > 0.0)) throw Error(ErrorCode::ZeroWeightSum, "no client contributed prompt updates");
    const ClientUpdateMsg* first = nullptr;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        if (weights[i] > 0.0) {
            first = &updates[i];
            break;
        }
    }
    for (std::size_t i = 0; i < updates.size(); ++i) {
        if (weights[i] > 0.0 && !same_token_shapes(updates[i].global_tokens, first->global_tokens)) {
            throw Error(ErrorCode::ShapeMismatch, "global token shapes differ between clients");
        }
    }
    std::vector<Matrix> mean;
    for (const auto& m : first->global_tokens) mean.emplace_back(m.rows(), m.cols());
    double seen = 0.0;
    for (std::size_t i = 0; i < updates.size(); ++i) {
        if (weights[i] == 0.0) continue;
        seen += weights[i];
        const double share = weights[i] / seen;
        for (std::size_t s = 0; s < mean.size(); ++s) {
            auto dst = mean[s].values();
            const auto src = updates[i].global_tokens[s].values();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += share * (src[j] - dst[j]);
        }
    }
    return mean;
}

std::optional<double> RoundReport::macro(std::span<const ClientRoundReport> clients,
                                         std::optional<double> ClientRoundReport::*field) {
    double sum = 0.0;
    int n = 0;
    for (const auto& c : clients) {
        if (const auto& v = c.*field) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

FederatedDataset build_dataset(const ExperimentConfig& config) {
    if (const auto* spec = std::get_if<SyntheticSpec>(&config.dataset)) {
        return generate_synthetic(*spec, config.seed);
    }
    const auto& src = std::get<ImportSource>(config.dataset);
    return load_federated(src.samples, src.anchors);
}

Simulation::Simulation(ExperimentConfig config) : Simulation(config, build_dataset(config)) {}

Simulation::Simulation(ExperimentConfig config, FederatedDataset dataset)
    : config_(std::move(config)), dataset_(std::move(dataset)) {
    dataset_.validate();
    config_.validate(dataset_.num_clients());
    if (dataset_.anchors.empty()) throw Error(ErrorCode::InvalidSpec, "dataset has no template anchors");
    mixer_ = FrozenTextMixer::make(dataset_.anchors, derive_seed(config_.seed, Stream::Mixer));
}

bool Simulation::dynamic() const noexcept { return std::holds_alternative<DynamicPromptGate>(config_.gate); }

GateContext Simulation::gate_context(const ClientState& client) const {
    GateContext ctx;
    ctx.mixer = &mixer_;
    ctx.client = client.client_id;
    ctx.tau = config_.prompt.tau;
    if (dynamic()) ctx.bank = &client.bank;
    return ctx;
}

GateView Simulation::client_gate(int client) const {
    return GateView(config_.gate, gate_context(clients_.at(client)), dataset_.num_classes);
}

template <typename Fn>
void Simulation::for_each_client(Fn&& fn) {
    const std::size_t K = clients_.size();
    const std::size_t threads =
        config_.client_threads == 0 ? K : std::min<std::size_t>(K, static_cast<std::size_t>(config_.client_threads));
    std::vector<std::exception_ptr> errors(K);
    auto work = [&](std::size_t lane) {
        for (std::size_t k = lane; k < K; k += threads) {
            try {
                fn(clients_[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void Simulation::aggregate(std::span<const ClientUpdateMsg> updates) {
    if (dynamic()) {
        const bool any = std::any_of(updates.begin(), updates.end(),
                                     [](const ClientUpdateMsg& u) { return u.prompt_samples > 0; });
        if (any) server_.global_tokens = fedavg_prompts(updates, config_.prompt_aggregation);
    }
    std::vector<LinearProbe> probes;
    std::vector<double> weights;
    for (const auto& u : updates) {
        probes.push_back(u.probe);
        weights.push_back(static_cast<double>(std::max<std::int64_t>(u.probe_samples, 0)));
    }
    if (std::any_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; })) {
        server_.probe = fedavg_linear(probes, weights);
    }
}

void Simulation::initialize() {
    if (initialized_) return;
    const int C = dataset_.num_classes;
    const int D = dataset_.dimension;
    const int K = dataset_.num_clients();

    PromptBank bank;
    if (const auto* dyn = std::get_if<DynamicPromptGate>(&config_.gate)) {
        bank = init_prompt_bank(dyn->variant, C, D, K, derive_seed(config_.seed, Stream::Bank));
        server_.global_tokens = bank.global;
    }
    server_.probe = LinearProbe::zeros(C, D);

    clients_.clear();
    for (const auto& data : dataset_.clients) {
        ClientState c;
        c.client_id = data.client_id;
        c.labeled = data.labeled;
        c.pool = data.unlabeled;
        c.test = data.test;
        c.bank = bank;
        c.probe = server_.probe;
        c.history.initial_id_count = std::count_if(c.pool.begin(), c.pool.end(),
                                                   [](const Sample& s) { return s.truth.is_id(); });
        c.initial_total = c.pool.size() + c.labeled.size();
        clients_.push_back(std::move(c));
    }

    // Round 0: fit the probe on the seed sets so uncertainty strategies have a model.
    std::vector<ClientUpdateMsg> updates(clients_.size());
    for_each_client([&](ClientState& c) {
        auto& u = updates[c.client_id];
        u.client_id = c.client_id;
        u.global_tokens = server_.global_tokens;
        if (!c.labeled.empty()) {
            Rng rng(derive_seed(config_.seed, Stream::ProbeTraining, c.client_id, 0));
            train_local(c.probe, as_probe_examples(c.labeled), config_.probe, rng);
            u.probe_samples = static_cast<std::int64_t>(c.labeled.size());
        }
        u.probe = c.probe;
    });

    if (dynamic() && config_.warmup_shots > 0) {
        for_each_client([&](ClientState& c) {
            const int W = config_.warmup_shots;
            std::vector<Sample> ood_candidates;
            for (const auto& s : c.pool) {
                if (s.truth.is_ood()) ood_candidates.push_back(s);
            }
            // Shot counts are per slot: up to W seed examples of every ID class
            // and, with ood_warmup, W oracle-labeled OOD draws from the pool.
            const int n_ood = config_.ood_warmup ? std::min(W, static_cast<int>(ood_candidates.size())) : 0;
            Rng rng(derive_seed(config_.seed, Stream::Warmup, c.client_id, 0));
            const auto id_shots =
                balanced_subsample(as_probe_examples(c.labeled), C, std::numeric_limits<int>::max(), rng, W);
            const auto ood_shots = select_random(ood_candidates, n_ood, rng);
            for (const auto& ex : id_shots) c.prompt_store.push_back(ex);
            std::vector<std::int64_t> moved;
            for (const auto& s : ood_shots) {
                c.prompt_store.push_back({s.embedding, ood_slot(C)});
                c.prompt_ood.push_back(s);
                moved.push_back(s.sample_id);
            }
            erase_ids(c.pool, moved);
            c.budget_debt = static_cast<int>(ood_shots.size());
            auto& u = updates[c.client_id];
            if (!c.prompt_store.empty()) {
                Rng train_rng(derive_seed(config_.seed, Stream::PromptTraining, c.client_id, 0));
                const auto res = train_prompts(c.bank, mixer_, c.client_id, c.prompt_store, config_.prompt, train_rng);
                u.prompt_samples = res.samples_used;
            }
            u.global_tokens = c.bank.global;
        });
    }
    aggregate(updates);

    if (std::holds_alternative<StaticZeroShot>(config_.gate)) {
        for_each_client([&](ClientState& c) {
            const auto part = partition_pool(c.pool, config_.gate, gate_context(c), C);
            for (const auto& s : part.exploration) c.static_exploration.push_back(s.sample_id);
            std::sort(c.static_exploration.begin(), c.static_exploration.end());
        });
    }
    initialized_ = true;
}

RoundReport Simulation::run_round(int round) {
    if (!initialized_) initialize();
    if (round < 1 || round > config_.rounds) throw Error(ErrorCode::InvalidConfig, "round outside 1..R");
    const int C = dataset_.num_classes;
    const std::size_t K = clients_.size();

    BroadcastMsg broadcast{round, server_.global_tokens, server_.probe};
    const Bytes broadcast_frame = encode(broadcast);

    RoundReport report;
    report.round = round;
    report.clients.resize(K);
    std::vector<PoolPartition> partitions(K);

    // (1) receive broadcast, (2) gate the pool.
    for_each_client([&](ClientState& c) {
        const auto msg = decode_broadcast(broadcast_frame);
        if (dynamic()) c.bank.global = msg.global_tokens;
        c.probe = msg.probe;
        auto& rep = report.clients[c.client_id];
        rep.client_id = c.client_id;
        auto& part = partitions[c.client_id];
        if (std::holds_alternative<StaticZeroShot>(config_.gate)) {
            part = apply_partition(c.pool, c.static_exploration);
        } else {
            part = partition_pool(c.pool, config_.gate, gate_context(c), C);
        }
        rep.gated_size = static_cast<int>(part.gated.size());
        rep.exploration_size = static_cast<int>(part.exploration.size());
        rep.purity = try_pool_purity(part.gated);
        for (const auto& s : part.gated) rep.gated_ids.push_back(s.sample_id);
        const bool has_id = std::any_of(c.test.begin(), c.test.end(), [](const Sample& s) { return s.truth.is_id(); });
        const bool has_ood = std::any_of(c.test.begin(), c.test.end(), [](const Sample& s) { return s.truth.is_ood(); });
        if (has_id && has_ood) {
            const GateView gate(config_.gate, gate_context(c), C);
            const auto gm = gate_test_metrics(gate, c.test);
            rep.gate_binary_acc = gm.binary_accuracy;
            rep.ood_recall = gm.ood_recall;
            rep.gate_id_bma = gm.id_bma;
        }
    });

    // Server-side budget split over the remaining pool sizes.
    std::vector<int> pool_sizes;
    for (const auto& c : clients_) pool_sizes.push_back(static_cast<int>(c.pool.size()));
    auto budgets = split_budget(config_.budget, pool_sizes);
    if (round == 1) {
        for (std::size_t k = 0; k < K; ++k) budgets[k] = std::max(0, budgets[k] - clients_[k].budget_debt);
    }
    if (config_.redistribute_budget) {
        std::int64_t leftover = 0;
        std::vector<std::int64_t> spare(K, 0);
        for (std::size_t k = 0; k < K; ++k) {
            const int gated = static_cast<int>(partitions[k].gated.size());
            leftover += std::max(0, budgets[k] - gated);
            spare[k] = std::max(0, gated - budgets[k]);
        }
        const std::int64_t total_spare = std::accumulate(spare.begin(), spare.end(), std::int64_t{0});
        const auto extra = proportional_split(std::min(leftover, total_spare), spare, spare);
        for (std::size_t k = 0; k < K; ++k) budgets[k] = std::min(budgets[k], static_cast<int>(partitions[k].gated.size())) + extra[k];
    }

    // (3) acquire, (4) oracle, (5) local training, (6) update message.
    std::vector<Bytes> frames(K);
    for_each_client([&](ClientState& c) {
        const int k = c.client_id;
        auto& rep = report.clients[k];
        const auto& part = partitions[k];
        rep.budget = budgets[k];

        std::vector<Sample> queries;
        if (!part.gated.empty() && budgets[k] > 0) {
            Rng rng(derive_seed(config_.seed, Stream::Acquisition, k, round));
            const AcquisitionInput input{part.gated, c.labeled, &c.probe};
            queries = select(config_.strategy, input, budgets[k], rng);
        }
        std::vector<QueryRecord> records;
        std::vector<std::int64_t> ids;
        for (const auto& q : queries) {
            records.push_back({q.sample_id, q.truth});
            ids.push_back(q.sample_id);
            const Slot slot = oracle_label(q, C);
            c.prompt_store.push_back({q.embedding, slot});
            if (q.truth.is_id()) {
                c.labeled.push_back(q);
            } else {
                c.prompt_ood.push_back(q);
            }
        }
        erase_ids(c.pool, ids);
        c.history.rounds.push_back(records);
        rep.queries = records;
        rep.qp = try_query_precision(records);
        if (c.history.initial_id_count > 0) rep.aqr = accumulated_query_recall(c.history, round);

        ClientUpdateMsg update;
        update.client_id = k;
        update.round = round;
        if (!queries.empty()) {
            if (dynamic() && !c.prompt_store.empty()) {
                Rng rng(derive_seed(config_.seed, Stream::PromptTraining, k, round));
                const auto res = train_prompts(c.bank, mixer_, k, c.prompt_store, config_.prompt, rng);
                rep.prompt_loss = res.loss_per_epoch;
                update.prompt_samples = res.samples_used;
            }
            if (!c.labeled.empty()) {
                Rng rng(derive_seed(config_.seed, Stream::ProbeTraining, k, round));
                rep.probe_loss = train_local(c.probe, as_probe_examples(c.labeled), config_.probe, rng);
                update.probe_samples = static_cast<std::int64_t>(c.labeled.size());
            }
        }
        if (dynamic()) update.global_tokens = c.bank.global;
        update.probe = c.probe;
        frames[k] = encode(update);
        rep.labeled_size = static_cast<int>(c.labeled.size());
        rep.prompt_ood_size = static_cast<int>(c.prompt_ood.size());
        rep.pool_size = static_cast<int>(c.pool.size());
    });

    // Server barrier.
    std::vector<ClientUpdateMsg> updates;
    for (std::size_t k = 0; k < K; ++k) {
        auto u = decode_client_update(frames[k]);
        if (u.client_id != static_cast<std::int64_t>(k) || u.round != round) {
            throw Error(ErrorCode::WireFormat, "update header does not match the sender");
        }
        if (!same_token_shapes(u.global_tokens, server_.global_tokens)) {
            throw Error(ErrorCode::PrivacyViolation, "update tokens do not match the broadcast global shape");
        }
        updates.push_back(std::move(u));
    }
    aggregate(updates);
    last_update_frames_ = std::move(frames);

    for (std::size_t k = 0; k < K; ++k) {
        std::vector<int> pred, truth;
        for (const auto& s : clients_[k].test) {
            if (!s.truth.is_id()) continue;
            truth.push_back(s.truth.index);
            pred.push_back(predict_class(server_.probe, s.embedding));
        }
        if (!truth.empty()) report.clients[k].bma = balanced_multiclass_accuracy(pred, truth, C);
    }
    return report;
}

ExperimentResult Simulation::run() {
    initialize();
    ExperimentResult result;
    for (int r = 1; r <= config_.rounds; ++r) result.rounds.push_back(run_round(r));
    if (dynamic()) {
        result.final_bank = clients_.front().bank;
        result.final_bank.global = server_.global_tokens;
        for (const auto& c : clients_) result.final_bank.local[c.client_id] = c.bank.local[c.client_id];
    }
    result.final_probe = server_.probe;
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    Simulation sim(config);
    auto result = sim.run();
    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        const RunLabels labels{mode_name(config.gate), variant_name(config.gate), to_string(config.strategy),
                               config.seed};
        {
            std::ofstream out(config.output_dir / "rounds.csv", std::ios::binary);
            if (!out) throw Error(ErrorCode::Io, "cannot write " + (config.output_dir / "rounds.csv").string());
            write_rounds_csv(out, labels, result.rounds);
        }
        {
            std::ofstream out(config.output_dir / "queries.csv", std::ios::binary);
            if (!out) throw Error(ErrorCode::Io, "cannot write queries.csv");
            write_queries_csv(out, result.rounds);
        }
        if (sim.dynamic()) save_prompt_bank(config.output_dir / "prompt_bank.bin", result.final_bank);
    }
    return result;
}

}  // namespace promptgate
