#include "promptgate/report.hpp"

#include <cstdio>
#include <vector>

namespace promptgate {

std::string format_metric(std::optional<double> value) {
    if (!value) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *value);
    return buf;
}

namespace {

std::optional<double> last_of(const std::vector<double>& trace) {
    if (trace.empty()) return std::nullopt;
    return trace.back();
}

struct Row {
    std::optional<double> qp, aqr, purity, bma, gate_binary_acc, ood_recall, gated, exploration, prompt_loss,
        probe_loss;
};

Row row_of(const ClientRoundReport& c) {
    return {c.qp,
            c.aqr,
            c.purity,
            c.bma,
            c.gate_binary_acc,
            c.ood_recall,
            static_cast<double>(c.gated_size),
            static_cast<double>(c.exploration_size),
            last_of(c.prompt_loss),
            last_of(c.probe_loss)};
}

std::optional<double> mean_of(std::span<const Row> rows, std::optional<double> Row::*field) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows) {
        if (const auto& v = r.*field) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

void write_row(std::ostream& out, int round, const std::string& client, const RunLabels& labels, const Row& r) {
    out << round << ',' << client << ',' << labels.mode << ',' << labels.variant << ',' << labels.strategy << ','
        << labels.seed << ',' << format_metric(r.qp) << ',' << format_metric(r.aqr) << ','
        << format_metric(r.purity) << ',' << format_metric(r.bma) << ',' << format_metric(r.gate_binary_acc) << ','
        << format_metric(r.ood_recall) << ',' << format_metric(r.gated) << ',' << format_metric(r.exploration)
        << ',' << format_metric(r.prompt_loss) << ',' << format_metric(r.probe_loss) << '\n';
}

}  // namespace

void write_rounds_csv(std::ostream& out, const RunLabels& labels, std::span<const RoundReport> rounds) {
    out << kRoundsCsvHeader << '\n';
    for (const auto& round : rounds) {
        std::vector<Row> rows;
        for (const auto& c : round.clients) {
            rows.push_back(row_of(c));
            write_row(out, round.round, std::to_string(c.client_id), labels, rows.back());
        }
        Row all;
        for (auto field : {&Row::qp, &Row::aqr, &Row::purity, &Row::bma, &Row::gate_binary_acc, &Row::ood_recall,
                           &Row::gated, &Row::exploration, &Row::prompt_loss, &Row::probe_loss}) {
            all.*field = mean_of(rows, field);
        }
        write_row(out, round.round, "ALL", labels, all);
    }
}

void write_queries_csv(std::ostream& out, std::span<const RoundReport> rounds) {
    out << kQueriesCsvHeader << '\n';
    for (const auto& round : rounds) {
        for (const auto& c : round.clients) {
            for (const auto& q : c.queries) {
                out << round.round << ',' << c.client_id << ',' << q.sample_id << ','
                    << (q.truth.is_id() ? "id" : "ood") << ',' << q.truth.index << '\n';
            }
        }
    }
}

}  // namespace promptgate
