#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "promptgate/federation.hpp"

namespace promptgate {

inline constexpr std::string_view kRoundsCsvHeader =
    "round,client,mode,variant,strategy,seed,qp,aqr,purity,bma,gate_binary_acc,ood_recall,"
    "gated_size,exploration_size,prompt_loss_final,probe_loss_final";

inline constexpr std::string_view kQueriesCsvHeader = "round,client,sample_id,truth_kind,truth_index";

struct RunLabels {
    std::string mode;
    std::string variant;
    std::string strategy;
    std::uint64_t seed = 0;
};

/// %.6g, or the empty string for an absent value.
std::string format_metric(std::optional<double> value);

/// One row per (round, client) plus a client=ALL macro-average row per round.
void write_rounds_csv(std::ostream& out, const RunLabels& labels, std::span<const RoundReport> rounds);
void write_queries_csv(std::ostream& out, std::span<const RoundReport> rounds);

}  // namespace promptgate
