#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "promptgate/cli/config.hpp"

namespace promptgate::cli {

/// Runs every entry (up to matrix.parallelism at once), then writes
/// summary.csv and manifest.json under the output root. Returns 0 when every
/// experiment succeeded, 1 otherwise; failures are reported on `log`.
int run_matrix(const ExperimentMatrix& matrix, std::ostream& log);

/// Mode-by-strategy summary from a results directory written by run_matrix:
/// rows are modes, columns strategies plus avg, cells "purity (bma)" in
/// percent from the last round's ALL row, averaged over seeds.
std::string summarize(const std::filesystem::path& results_dir);

}  // namespace promptgate::cli
