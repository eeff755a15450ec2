#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "promptgate/cli/config.hpp"
#include "promptgate/cli/runner.hpp"
#include "promptgate/error.hpp"

using namespace promptgate;

namespace {

void apply_overrides(cli::ExperimentMatrix& m, const std::optional<std::uint64_t>& seed,
                     const std::optional<int>& parallel, const std::string& out) {
    if (seed) m.seeds = {*seed};
    if (parallel) m.parallelism = std::max(1, *parallel);
    if (!out.empty()) m.output_root = out;
    cli::rebuild(m);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated open-set active learning with prompt-tuned gating"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cli::kVersion));

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> parallel;
    std::string out_dir;

    auto* run = app.add_subcommand("run", "Run every experiment of a config matrix");
    run->add_option("config", config_path, "YAML config")->required()->check(CLI::ExistingFile);
    run->add_option("--seed-override", seed_override, "Run only this seed");
    run->add_option("--parallel", parallel, "Experiments to run at once");
    run->add_option("--out", out_dir, "Results root (overrides the config)");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Parse a config and list its experiments");
    validate->add_option("config", validate_path, "YAML config")->required()->check(CLI::ExistingFile);

    std::string results_dir;
    auto* summarize = app.add_subcommand("summarize", "Print the summary table of a results directory");
    summarize->add_option("results-dir", results_dir, "Directory written by run")->required()->check(
        CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto m = cli::parse_config(config_path);
            apply_overrides(m, seed_override, parallel, out_dir);
            std::cerr << m.entries.size() << " experiment(s) -> " << m.output_root.string() << '\n';
            const int status = cli::run_matrix(m, std::cerr);
            if (status == 0) std::cout << cli::summarize(m.output_root);
            return status;
        }
        if (*validate) {
            const auto m = cli::parse_config(validate_path);
            std::cout << "ok: " << m.name << ", " << m.entries.size() << " experiment(s), config hash "
                      << m.config_hash << '\n';
            for (const auto& e : m.entries) std::cout << "  " << e.subdir << '\n';
            return 0;
        }
        if (*summarize) {
            std::cout << cli::summarize(results_dir);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
