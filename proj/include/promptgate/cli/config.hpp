#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "promptgate/federation.hpp"

namespace promptgate::cli {

inline constexpr std::string_view kVersion = "0.1.0";

/// Mode labels accepted in `modes:`; the dynamic variants are named directly.
/// coldstart | upper | static | mixed | global | local
GateMode parse_mode(std::string_view label, const StaticZeroShot& static_settings);

struct MatrixEntry {
    ExperimentConfig config;
    std::string mode_label;
    std::string strategy_label;
    std::string subdir;  // "<mode>-<strategy>-seed<k>"
};

struct ExperimentMatrix {
    std::string name;
    ExperimentConfig base;  // gate, strategy, seed and output_dir unset
    StaticZeroShot static_settings;
    std::vector<MatrixEntry> entries;  // seeds innermost, then strategies, then modes
    std::vector<std::string> modes;
    std::vector<std::string> strategies;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_root;
    int parallelism = 1;
    /// Everything that changes results; output location and parallelism excluded.
    std::string canonical;
    std::string config_hash;  // 16 hex digits, FNV-1a 64 of `canonical`
};

/// Strict YAML schema. Unknown keys and wrong types raise SchemaError with the
/// key path and 1-based line. Relative import paths resolve against `base_dir`.
ExperimentMatrix parse_config_text(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentMatrix parse_config(const std::filesystem::path& path);

/// Expands base x modes x strategies x seeds into entries and refreshes the
/// canonical form and hash. Call after editing seeds or output_root.
void rebuild(ExperimentMatrix& matrix);

std::string canonical_experiment(const ExperimentConfig& config);
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace promptgate::cli
