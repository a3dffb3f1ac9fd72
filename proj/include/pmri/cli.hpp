#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pmri/config.hpp"
#include "pmri/dataset.hpp"
#include "pmri/interp.hpp"
#include "pmri/metrics.hpp"
#include "pmri/trainer.hpp"

namespace pmri {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitData = 3, kExitDivergence = 4 };

/// Maps an exception to the process exit code.
int exit_code_for(const std::exception& e);

/// Builds the dataset and writes it to `out`.
Dataset cmd_simulate(const RunConfig& config, const fs::path& out);

/// Trains one phase. Writes the checkpoint to `out` and the report to
/// `out` + ".report.json". Finetune phases need `pretrained`.
TrainResult cmd_train(const RunConfig& config, const fs::path& dataset, Phase phase, const fs::path& pretrained,
                      const fs::path& out);

/// Pairwise (1 - alpha) first + alpha second.
ModelCheckpoint cmd_interp(const fs::path& first, const fs::path& second, double alpha, bool allow_extrapolation,
                           const fs::path& out);
/// General multi-model combination.
ModelCheckpoint cmd_interp(const std::vector<fs::path>& sources, const std::vector<double>& coefficients,
                           bool allow_extrapolation, const fs::path& out);

/// One report per simulated acceleration over the validation split, written as
/// <out_dir>/<name>_af<N>.json and .csv. An empty checkpoint path evaluates
/// the zero-filled baseline.
std::vector<MetricReport> cmd_eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& dataset,
                                   const fs::path& out_dir, const std::string& name = "metrics");

/// Interpolation sweep: <out_dir>/sweep.csv with validation means at
/// metrics.acceleration, plus slice<i>_alpha<a>.png per sweep slice.
SweepTable cmd_sweep(const RunConfig& config, const fs::path& sn, const fs::path& gan, const std::vector<double>& grid,
                     const fs::path& dataset, const fs::path& out_dir);

/// Serves the HTTP API until the process is stopped.
void cmd_serve(const RunConfig& config, const fs::path& sn, const fs::path& gan, const fs::path& dataset,
               const std::string& host, int port);

/// Entry point of the `pmri` tool.
int run_cli(int argc, char** argv);

}  // namespace pmri
