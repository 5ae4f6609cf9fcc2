#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lapal/cli/commands.hpp"
#include "lapal/cli/config.hpp"
#include "lapal/common/log.hpp"
#include "lapal/envsim/demos.hpp"

namespace {

using lapal::cli::TrainConfig;

struct ConfigFlags {
  std::string preset;
  std::string file;
  std::vector<std::string> sets;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Base preset (desk, paper)");
    cmd->add_option("--config", file, "Config file layered over the preset")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "Override as section.key=value (repeatable)");
  }
  TrainConfig resolve() const { return lapal::cli::resolve_config(preset, file, sets); }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw lapal::ConfigError("--seeds expects comma separated integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw lapal::ConfigError("--seeds is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-action adversarial imitation: experts, codecs, training, evaluation, plots"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(lapal::cli::kVersion));
  std::string log_level = "info";
  const std::map<std::string, lapal::LogLevel> levels{{"debug", lapal::LogLevel::kDebug},
                                                       {"info", lapal::LogLevel::kInfo},
                                                       {"warn", lapal::LogLevel::kWarn},
                                                       {"error", lapal::LogLevel::kError},
                                                       {"silent", lapal::LogLevel::kSilent}};
  app.add_option("--log-level", log_level, "debug, info, warn, error or silent")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "silent"}));

  lapal::cli::GenExpertsArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-experts", "Roll out the scripted expert and save demonstrations");
  gen_cmd->add_option("--env", gen.env_id, "Environment id")->required();
  gen_cmd->add_option("--episodes", gen.episodes, "Number of episodes")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Rollout seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Demo file to write")->required();

  lapal::cli::TrainCvaeArgs cvae;
  ConfigFlags cvae_cfg;
  std::optional<int> cvae_latent, cvae_epochs;
  std::optional<double> cvae_beta;
  auto* cvae_cmd = app.add_subcommand("train-cvae", "Pretrain the action encoder-decoder on demonstrations");
  cvae_cmd->add_option("--demos", cvae.demos, "Demo file")->required()->check(CLI::ExistingFile);
  cvae_cmd->add_option("--out", cvae.out, "Codec file to write")->required();
  cvae_cmd->add_option("--seed", cvae.seed, "Training seed")->capture_default_str();
  cvae_cmd->add_option("--latent-dim", cvae_latent, "Latent action dimension");
  cvae_cmd->add_option("--epochs", cvae_epochs, "Training epochs");
  cvae_cmd->add_option("--beta", cvae_beta, "KL weight");
  cvae_cfg.add_to(cvae_cmd);

  lapal::cli::TrainArgs train;
  ConfigFlags train_cfg;
  std::string train_algo, train_env, train_seeds;
  std::optional<std::string> train_codec;
  std::optional<std::int64_t> train_steps;
  auto* train_cmd = app.add_subcommand("train", "Adversarial imitation over one or more seeds");
  train_cmd->add_option("--algo", train_algo, "gail, lapal-agnostic or lapal-aware")->required();
  train_cmd->add_option("--env", train_env, "Environment id (default: the demo file's)");
  train_cmd->add_option("--demos", train.demos, "Expert demo file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--codec", train_codec, "Pretrained codec (lapal modes only)");
  train_cmd->add_option("--seeds", train_seeds, "Comma separated seeds (default from config)");
  train_cmd->add_option("--total-steps", train_steps, "Environment step budget per seed");
  train_cmd->add_option("--jobs", train.jobs, "Seeds trained concurrently")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cfg.add_to(train_cmd);

  lapal::cli::EvalArgs eval;
  std::optional<std::string> eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Average evaluation return of a policy");
  eval_cmd->add_option("policy", eval.policy, "Checkpoint file, 'expert' or 'random'")->required();
  eval_cmd->add_option("--env", eval.env_id, "Environment id (default: the checkpoint's)");
  eval_cmd->add_option("--episodes", eval.episodes, "Evaluation episodes")->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "Episode set seed")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "CSV of per-episode returns");

  lapal::cli::TransferArgs transfer;
  ConfigFlags transfer_cfg;
  std::string transfer_seeds;
  auto* transfer_cmd = app.add_subcommand("transfer", "Retrain the decoder on target demos and compare policies");
  transfer_cmd->add_option("--source", transfer.source, "Source latent policy checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--demos", transfer.target_demos, "Target env demo file")
      ->required()
      ->check(CLI::ExistingFile);
  transfer_cmd->add_option("--seeds", transfer_seeds, "Comma separated codec seeds (default from config)");
  transfer_cmd->add_option("--episodes", transfer.episodes, "Evaluation episodes")->capture_default_str();
  transfer_cmd->add_option("--out", transfer.out, "Output directory")->required();
  transfer_cfg.add_to(transfer_cmd);

  lapal::cli::PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "SVG learning curves from aggregate CSVs");
  plot_cmd->add_option("inputs", plot.inputs, "aggregate.csv files, optionally label=path")->required();
  plot_cmd->add_option("--out", plot.out, "SVG file; a _normalized variant is written beside it")->required();
  plot_cmd->add_option("--title", plot.title, "Chart title")->capture_default_str();

  ConfigFlags show_cfg;
  auto* config_cmd = app.add_subcommand("config", "Print the resolved configuration");
  show_cfg.add_to(config_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lapal::cli::kExitUsage;
  }
  lapal::set_log_level(levels.at(log_level));

  try {
    if (*gen_cmd) {
      lapal::cli::cmd_gen_experts(gen, std::cout);
    } else if (*cvae_cmd) {
      cvae.config = cvae_cfg.resolve();
      if (cvae_latent) cvae.config.run.cvae.latent_dim = *cvae_latent;
      if (cvae_epochs) cvae.config.run.cvae.epochs = *cvae_epochs;
      if (cvae_beta) cvae.config.run.cvae.beta = *cvae_beta;
      lapal::cli::cmd_train_cvae(cvae, std::cout);
    } else if (*train_cmd) {
      train.config = train_cfg.resolve();
      train.config.run.algo = lapal::orch::algo_from_string(train_algo);
      train.config.run.env_id =
          train_env.empty() ? lapal::env::load_demos(train.demos).env_id : train_env;
      if (!train_seeds.empty()) train.config.seeds = parse_seeds(train_seeds);
      if (train_steps) train.config.run.total_env_steps = *train_steps;
      train.codec = train_codec;
      lapal::cli::cmd_train(train, std::cout);
    } else if (*eval_cmd) {
      eval.out = eval_out;
      lapal::cli::cmd_eval(eval, std::cout);
    } else if (*transfer_cmd) {
      transfer.config = transfer_cfg.resolve();
      if (!transfer_seeds.empty()) transfer.config.seeds = parse_seeds(transfer_seeds);
      lapal::cli::cmd_transfer(transfer, std::cout);
    } else if (*plot_cmd) {
      lapal::cli::cmd_plot(plot, std::cout);
    } else if (*config_cmd) {
      std::cout << lapal::cli::serialize_config(show_cfg.resolve());
    }
  } catch (...) {
    return lapal::cli::exit_code_for_current_exception(std::cerr);
  }
  return lapal::cli::kExitOk;
}
