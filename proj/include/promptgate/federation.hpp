#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "promptgate/acquisition.hpp"
#include "promptgate/dataset.hpp"
#include "promptgate/gate.hpp"
#include "promptgate/metrics.hpp"
#include "promptgate/prompt.hpp"
#include "promptgate/synthetic.hpp"
#include "promptgate/task_model.hpp"
#include "promptgate/wire.hpp"

namespace promptgate {

struct ImportSource {
    std::filesystem::path samples;
    std::filesystem::path anchors;

    friend bool operator==(const ImportSource&, const ImportSource&) = default;
};

using DatasetSource = std::variant<SyntheticSpec, ImportSource>;

enum class PromptAggregation { Weighted, Uniform };

struct ExperimentConfig {
    DatasetSource dataset = SyntheticSpec{};
    GateMode gate = DynamicPromptGate{PromptVariant::mixed()};
    StrategyKind strategy = StrategyKind::random();
    int rounds = 5;
    int budget = 500;  // per round, split across clients
    PromptHyper prompt;  // prompt.tau is also the gate temperature
    ProbeHyper probe;
    int warmup_shots = 0;
    bool ood_warmup = true;
    PromptAggregation prompt_aggregation = PromptAggregation::Weighted;
    bool redistribute_budget = false;
    /// 1 runs clients sequentially; 0 uses one thread per client.
    int client_threads = 0;
    std::uint64_t seed = 0;
    /// Empty: results are returned but nothing is written.
    std::filesystem::path output_dir;

    void validate(int num_clients) const;
};

/// Every non-empty pool first gets one query (when total allows), the rest is
/// split in proportion to the remaining capacity with largest-remainder
/// rounding (ties to the lower client id). No client exceeds its pool.
std::vector<int> split_budget(int total, std::span<const int> pool_sizes);

/// ID(c) -> slot c; any OOD mode -> the single OOD slot C.
Slot oracle_label(const Sample& sample, int num_classes);

/// Weighted coordinate-wise mean of the clients' global token copies.
/// Uniform aggregation gives every update with n_k > 0 weight one.
std::vector<Matrix> fedavg_prompts(std::span<const ClientUpdateMsg> updates,
                                   PromptAggregation aggregation = PromptAggregation::Weighted);

struct ClientRoundReport {
    int client_id = 0;
    std::vector<QueryRecord> queries;
    std::vector<std::int64_t> gated_ids;
    std::optional<double> qp;
    std::optional<double> aqr;
    std::optional<double> purity;
    std::optional<double> bma;  // aggregated probe on this client's ID test samples
    std::optional<double> gate_binary_acc;
    std::optional<double> ood_recall;
    std::optional<double> gate_id_bma;
    int gated_size = 0;
    int exploration_size = 0;
    int budget = 0;
    std::vector<double> prompt_loss;
    std::vector<double> probe_loss;
    // Bookkeeping after the round.
    int labeled_size = 0;
    int prompt_ood_size = 0;
    int pool_size = 0;
};

struct RoundReport {
    int round = 0;
    std::vector<ClientRoundReport> clients;

    /// Mean over clients of the values that are present.
    static std::optional<double> macro(std::span<const ClientRoundReport> clients,
                                       std::optional<double> ClientRoundReport::*field);
};

struct ClientState {
    int client_id = 0;
    std::vector<Sample> labeled;        // L_k (ID only)
    std::vector<Sample> pool;           // U_k, remaining
    std::vector<Sample> test;
    std::vector<LabeledEmbedding> prompt_store;  // every oracle-labeled example for prompt training
    std::vector<Sample> prompt_ood;     // queried / warm-up OOD samples
    PromptBank bank;                    // empty unless the gate is dynamic
    LinearProbe probe;
    QueryHistory history;
    std::vector<std::int64_t> static_exploration;  // sorted ids, static mode only
    int budget_debt = 0;                // warm-up OOD draws charged to round 1
    std::size_t initial_total = 0;      // |U_k| + |L_k| at start
};

struct ServerState {
    std::vector<Matrix> global_tokens;
    LinearProbe probe;
};

struct ExperimentResult {
    std::vector<RoundReport> rounds;
    PromptBank final_bank;  // server global tokens plus every client's private tokens
    LinearProbe final_probe;
};

/// One experiment: dataset, frozen mixer, server and client states.
class Simulation {
public:
    explicit Simulation(ExperimentConfig config);
    Simulation(ExperimentConfig config, FederatedDataset dataset);

    /// Probe fit on seed sets, optional prompt warm-up, static partition.
    void initialize();
    RoundReport run_round(int round);
    ExperimentResult run();

    const ExperimentConfig& config() const noexcept { return config_; }
    const FederatedDataset& dataset() const noexcept { return dataset_; }
    const FrozenTextMixer& mixer() const noexcept { return mixer_; }
    const ServerState& server() const noexcept { return server_; }
    const std::vector<ClientState>& clients() const noexcept { return clients_; }
    bool dynamic() const noexcept;

    /// Every client's BroadcastMsg / ClientUpdateMsg frame of the last round.
    const std::vector<Bytes>& last_update_frames() const noexcept { return last_update_frames_; }
    /// Gate (test metrics) for a client under the current parameters.
    GateView client_gate(int client) const;

private:
    GateContext gate_context(const ClientState& client) const;
    template <typename Fn>
    void for_each_client(Fn&& fn);
    void aggregate(std::span<const ClientUpdateMsg> updates);

    ExperimentConfig config_;
    FederatedDataset dataset_;
    FrozenTextMixer mixer_;
    ServerState server_;
    std::vector<ClientState> clients_;
    std::vector<Bytes> last_update_frames_;
    bool initialized_ = false;
};

/// Builds the dataset, runs rounds 1..R and, when output_dir is set, writes
/// rounds.csv, queries.csv and prompt_bank.bin there.
ExperimentResult run_experiment(const ExperimentConfig& config);

FederatedDataset build_dataset(const ExperimentConfig& config);

}  // namespace promptgate
