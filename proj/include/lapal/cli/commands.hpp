#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lapal/cli/config.hpp"

namespace lapal::cli {

inline constexpr char kVersion[] = "0.1.0";

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitQuality = 3;
inline constexpr int kExitIo = 4;

// Maps a thrown error to its exit code and prints it to err.
int exit_code_for_current_exception(std::ostream& err);

// Writes <out> (demo file) and <out>.summary.txt. On a quality-gate failure
// the summary records the reason and QualityError is rethrown; the demo file
// is not written.
struct GenExpertsArgs {
  std::string env_id;
  int episodes = 64;
  std::uint64_t seed = 0;
  std::string out;
};
void cmd_gen_experts(const GenExpertsArgs& args, std::ostream& log);

// Writes <out> (codec), <out>.curve.csv (epoch,train_loss,heldout_recon) and
// <out>.summary.txt. The codec settings come from config.run.cvae.
struct TrainCvaeArgs {
  std::string demos;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::string out;
};
void cmd_train_cvae(const TrainCvaeArgs& args, std::ostream& log);

// Held-out reconstruction MSE of a saved codec on the split train-cvae used.
double recompute_heldout_mse(const std::string& codec_path, const std::string& demos_path,
                             std::uint64_t seed);

// One run per seed under <out>/seed_<s>/ (curve.csv, initial.ckpt,
// final.ckpt, or diagnostics.txt when the divergence detector fires), plus
// <out>/aggregate.csv, <out>/config.ini and <out>/manifest.json. Seeds run on
// up to jobs threads. A diverged seed makes the command fail with
// QualityError after all seeds finish.
struct TrainArgs {
  TrainConfig config;  // algo, env and seeds are taken from here
  std::string demos;
  std::optional<std::string> codec;
  std::string out;
  int jobs = 1;
};
void cmd_train(const TrainArgs& args, std::ostream& log);

// Evaluates a checkpoint, or the scripted expert / uniform random policy when
// policy is "expert" or "random". env_id defaults to the checkpoint's env.
struct EvalArgs {
  std::string policy;
  std::string env_id;
  int episodes = 16;
  std::uint64_t seed = 0x6576616cULL;
  std::optional<std::string> out;  // optional CSV of per-episode returns
};
void cmd_eval(const EvalArgs& args, std::ostream& out);

// For every seed: trains a codec on the target demos, composes it with the
// source checkpoint's latent actor and evaluates source, transferred and
// expert policies on the target env. Prints the table and writes
// <out>/transfer.csv plus <out>/codec_seed_<s>.bin.
struct TransferArgs {
  std::string source;
  std::string target_demos;
  TrainConfig config;  // run.cvae and seeds are used
  int episodes = 16;
  std::string out;
};
void cmd_transfer(const TransferArgs& args, std::ostream& out);

// Reads aggregate CSVs given as "label=path" (or a bare path labelled by its
// parent directory) and writes <out> and <out stem>_normalized.svg. Nothing is
// written when any input is empty or malformed.
struct PlotArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string title = "learning curves";
};
void cmd_plot(const PlotArgs& args, std::ostream& log);

}  // namespace lapal::cli
