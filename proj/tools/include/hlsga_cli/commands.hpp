#pragma once

#include <cstdint>
#include <iosfwd>

#include "hlsga_cli/config.hpp"

namespace hlsga::cli {

/// Trains at lambda = 0 (or loads init_model), fine-tunes, then writes
/// curve.csv, summary.json and model.json into cfg.out_dir.
void cmd_finetune(const RunConfig& cfg, std::ostream& log);

/// Runs cfg.method and writes trace.csv, gen_best.csv (ga only),
/// summary.json and model.json into cfg.out_dir.
void cmd_search(const RunConfig& cfg, std::ostream& log);

/// Prints a pass/fail table; returns true iff every check passed.
bool cmd_oracles(std::uint64_t seed, std::ostream& log);

/// Writes the synthetic dataset described by cfg.dataset as an IDX pair.
void cmd_data_synth(const RunConfig& cfg, std::ostream& log);

}  // namespace hlsga::cli
