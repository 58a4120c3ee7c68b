#pragma once

#include <string>

#include "mdt/experiment.hpp"

namespace mdt::cli {

// Process exit codes; each error class maps to its own code.
enum ExitCode {
  kOk = 0,
  kFailure = 1,
  kConfigExit = 2,
  kDataExit = 3,
  kTrainingHaltExit = 4,
  kIoExit = 5,
};

// Materializes the synthetic dataset under cfg.out_dir. Idempotent for a
// fixed seed: re-running produces byte-identical files.
void cmd_synth(const ExperimentConfig& cfg);

// Trains on cfg.dataset (its train/ split when present): JSON-lines loss log,
// per-epoch checkpoints, and a per-epoch sample grid under cfg.out_dir.
void cmd_train(ExperimentConfig cfg);

// Translates every input image into every domain of the checkpoint, writing
// <stem>.to_<domain>.png. No source-domain label exists at this interface.
void cmd_translate(const ExperimentConfig& cfg);

// Evaluates a checkpoint against a dataset: per-pair and across-all-domains
// SSIM / FID / KID / classification accuracy / cosine distance / diversity,
// plus SSIM exceedance curves. Writes report.json and curves/*.csv.
void cmd_evaluate(const ExperimentConfig& cfg);

int exit_code_for(const std::exception& e);

}  // namespace mdt::cli
