#include "promptgate/cli/runner.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "promptgate/error.hpp"
#include "promptgate/report.hpp"

namespace promptgate::cli {

namespace {

using json = nlohmann::json;

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct LastRound {
    std::optional<double> purity;
    std::optional<double> bma;
};

LastRound read_last_round(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + csv.string());
    std::string line;
    std::getline(in, line);
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw Error(ErrorCode::ParseError, csv.string() + ": missing column " + name);
    };
    const auto c_round = column("round"), c_client = column("client"), c_purity = column("purity"),
               c_bma = column("bma");
    int best_round = -1;
    LastRound out;
    while (std::getline(in, line)) {
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size() || cells[c_client] != "ALL") continue;
        const int r = std::stoi(cells[c_round]);
        if (r < best_round) continue;
        best_round = r;
        out.purity = cells[c_purity].empty() ? std::nullopt : std::optional<double>(std::stod(cells[c_purity]));
        out.bma = cells[c_bma].empty() ? std::nullopt : std::optional<double>(std::stod(cells[c_bma]));
    }
    if (best_round < 0) throw Error(ErrorCode::ParseError, csv.string() + ": no ALL rows");
    return out;
}

struct Mean {
    double sum = 0.0;
    int n = 0;
    void add(std::optional<double> v) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    std::optional<double> value() const { return n ? std::optional<double>(sum / n) : std::nullopt; }
};

std::string cell(std::optional<double> purity, std::optional<double> bma) {
    auto pct = [](std::optional<double> v) {
        if (!v) return std::string("-");
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
        return std::string(buf);
    };
    return pct(purity) + " (" + pct(bma) + ")";
}

}  // namespace

int run_matrix(const ExperimentMatrix& matrix, std::ostream& log) {
    std::filesystem::create_directories(matrix.output_root);
    const auto started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();

    struct Outcome {
        bool ok = false;
        std::string error;
        double seconds = 0.0;
    };
    std::vector<Outcome> outcomes(matrix.entries.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= matrix.entries.size()) return;
            const auto& entry = matrix.entries[i];
            const auto start = std::chrono::steady_clock::now();
            try {
                run_experiment(entry.config);
                outcomes[i].ok = true;
            } catch (const std::exception& e) {
                outcomes[i].error = e.what();
            }
            outcomes[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::lock_guard lock(log_mutex);
            char secs[32];
            std::snprintf(secs, sizeof secs, "%.2fs", outcomes[i].seconds);
            log << (outcomes[i].ok ? "done   " : "FAILED ") << entry.subdir << " (" << secs << ")";
            if (!outcomes[i].ok) log << ": " << outcomes[i].error;
            log << '\n';
        }
    };
    const auto lanes = std::min<std::size_t>(static_cast<std::size_t>(matrix.parallelism), matrix.entries.size());
    if (lanes <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < lanes; ++t) pool.emplace_back(worker);
    }

    json manifest;
    manifest["name"] = matrix.name;
    manifest["version"] = std::string(kVersion);
    manifest["compiler"] = __VERSION__;
    manifest["config_hash"] = matrix.config_hash;
    manifest["started_at"] = started;
    manifest["finished_at"] = utc_now();
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest["modes"] = matrix.modes;
    manifest["strategies"] = matrix.strategies;
    manifest["seeds"] = matrix.seeds;
    json experiments = json::array();
    bool all_ok = true;
    for (std::size_t i = 0; i < matrix.entries.size(); ++i) {
        const auto& e = matrix.entries[i];
        json item;
        item["dir"] = e.subdir;
        item["mode"] = e.mode_label;
        item["variant"] = variant_name(e.config.gate);
        item["strategy"] = e.strategy_label;
        item["seed"] = e.config.seed;
        item["config_hash"] = hex64(fnv1a64(canonical_experiment(e.config)));
        item["status"] = outcomes[i].ok ? "ok" : "failed";
        if (!outcomes[i].ok) item["error"] = outcomes[i].error;
        item["wall_time_s"] = outcomes[i].seconds;
        experiments.push_back(item);
        all_ok = all_ok && outcomes[i].ok;
    }
    manifest["experiments"] = experiments;
    {
        std::ofstream out(matrix.output_root / "manifest.json", std::ios::binary);
        if (!out) throw Error(ErrorCode::Io, "cannot write manifest.json");
        out << manifest.dump(2) << '\n';
    }
    if (!all_ok) {
        log << "some experiments failed; summary not written\n";
        return 1;
    }
    const auto summary = summarize(matrix.output_root);
    std::ofstream out(matrix.output_root / "summary.csv", std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write summary.csv");
    out << summary;
    return 0;
}

std::string summarize(const std::filesystem::path& results_dir) {
    std::ifstream in(results_dir / "manifest.json");
    if (!in) throw Error(ErrorCode::Io, "no manifest.json in " + results_dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("manifest.json: ") + e.what());
    }
    const auto modes = manifest.at("modes").get<std::vector<std::string>>();
    const auto strategies = manifest.at("strategies").get<std::vector<std::string>>();
    std::map<std::pair<std::string, std::string>, std::pair<Mean, Mean>> cells;
    for (const auto& item : manifest.at("experiments")) {
        if (item.at("status") != "ok") continue;
        const auto last = read_last_round(results_dir / item.at("dir").get<std::string>() / "rounds.csv");
        auto& c = cells[{item.at("mode").get<std::string>(), item.at("strategy").get<std::string>()}];
        c.first.add(last.purity);
        c.second.add(last.bma);
    }
    std::ostringstream out;
    out << "mode";
    for (const auto& s : strategies) out << ',' << s;
    out << ",avg\n";
    for (const auto& m : modes) {
        out << m;
        Mean avg_purity, avg_bma;
        for (const auto& s : strategies) {
            const auto it = cells.find({m, s});
            std::optional<double> p, b;
            if (it != cells.end()) {
                p = it->second.first.value();
                b = it->second.second.value();
            }
            avg_purity.add(p);
            avg_bma.add(b);
            out << ',' << cell(p, b);
        }
        out << ',' << cell(avg_purity.value(), avg_bma.value()) << '\n';
    }
    return out.str();
}

}  // namespace promptgate::cli
