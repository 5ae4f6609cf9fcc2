#include "lapal/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lapal/cli/plot.hpp"
#include "lapal/common/binary_io.hpp"
#include "lapal/common/errors.hpp"
#include "lapal/common/log.hpp"
#include "lapal/orchestrator/run.hpp"

namespace lapal::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void require_path(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string(what) + " is required");
}

latent::ActionCodec load_codec_for(const std::string& path, const env::Env& e) {
  const auto& spec = e.spec();
  return latent::load_codec(path, spec.state_dim, spec.action_low, spec.action_high);
}

// Outcome of one training seed.
struct SeedOutcome {
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string error;
  orch::LearningCurve curve;
};

}  // namespace

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const QualityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitQuality;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitQuality;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

void cmd_gen_experts(const GenExpertsArgs& args, std::ostream& log) {
  require_path(args.out, "--out");
  if (args.episodes < 1) throw ConfigError("--episodes must be at least 1");
  const env::Env e = env::Env::make(args.env_id);
  const std::string summary_path = args.out + ".summary.txt";
  env::DemoBuffer demos;
  try {
    demos = env::collect_demos(e, args.episodes, args.seed);
  } catch (const QualityError& err) {
    write_file_atomic(summary_path, "env_id: " + args.env_id + "\nepisodes: " +
                                        std::to_string(args.episodes) + "\nseed: " +
                                        std::to_string(args.seed) +
                                        "\nquality_gate: rejected\nreason: " + err.what() + "\n");
    throw;
  }
  const env::DemoQuality quality = env::assess_demos(e, demos, args.seed);
  std::string summary = "seed: " + std::to_string(args.seed) + "\n" + env::demo_summary(demos, quality);
  if (!quality.accepted) {
    summary += "reason: expert does not beat uniform random torques by the required margin\n";
    write_file_atomic(summary_path, summary);
    throw QualityError("expert demonstrations for " + args.env_id + " failed the quality gate");
  }
  env::save_demos(args.out, demos);
  write_file_atomic(summary_path, summary);
  log << "wrote " << demos.num_episodes() << " episodes (" << demos.size() << " transitions) to "
      << args.out << "\n";
}

void cmd_train_cvae(const TrainCvaeArgs& args, std::ostream& log) {
  require_path(args.demos, "--demos");
  require_path(args.out, "--out");
  const env::DemoBuffer demos = env::load_demos(args.demos);
  const env::Env e = env::Env::make(demos.env_id);
  if (demos.env_digest != e.digest()) {
    throw ConfigError("demo file " + args.demos + " was recorded on a different " + demos.env_id);
  }
  const auto& spec = e.spec();
  const latent::TrainedCodec trained =
      latent::train_codec(demos, spec.action_low, spec.action_high, args.config.run.cvae, args.seed);

  // Held-out metrics are recomputed for zero epochs too, so the summary always
  // describes the saved parameters.
  const auto held = latent::heldout_indices(demos.size(), args.seed);
  const nn::Matrix states = demos.states(), actions = demos.actions();
  nn::Matrix hs(states.rows(), static_cast<Eigen::Index>(held.size()));
  nn::Matrix ha(actions.rows(), static_cast<Eigen::Index>(held.size()));
  for (std::size_t i = 0; i < held.size(); ++i) {
    hs.col(static_cast<Eigen::Index>(i)) = states.col(static_cast<Eigen::Index>(held[i]));
    ha.col(static_cast<Eigen::Index>(i)) = actions.col(static_cast<Eigen::Index>(held[i]));
  }
  const latent::CodecTrainRecord heldout = latent::evaluate_codec(trained.codec, hs, ha);

  std::string curve = "epoch,train_loss,heldout_recon\n";
  for (std::size_t i = 0; i < trained.record.epoch_loss.size(); ++i) {
    curve += std::to_string(i + 1) + "," + num(trained.record.epoch_loss[i]) + "," +
             num(trained.record.heldout_recon[i]) + "\n";
  }
  std::ostringstream summary;
  summary << "env_id: " << demos.env_id << "\n";
  summary << "demo_digest: " << hex64(demos.digest()) << "\n";
  summary << "seed: " << args.seed << "\n";
  summary << "latent_dim: " << args.config.run.cvae.latent_dim << "\n";
  summary << "beta: " << num(args.config.run.cvae.beta) << "\n";
  summary << "epochs: " << args.config.run.cvae.epochs << "\n";
  summary << "train_size: " << demos.size() - held.size() << "\n";
  summary << "heldout_size: " << held.size() << "\n";
  summary << "heldout_recon_mse: " << num(heldout.heldout_recon_mse) << "\n";
  summary << "heldout_kl: " << num(heldout.heldout_kl) << "\n";
  summary << "baseline_mse: " << num(heldout.baseline_mse) << "\n";
  summary << "codec_digest: " << hex64(trained.codec.digest()) << "\n";

  latent::save_codec(args.out, trained.codec);
  write_file_atomic(args.out + ".curve.csv", curve);
  write_file_atomic(args.out + ".summary.txt", summary.str());
  log << "codec held-out recon MSE " << num(heldout.heldout_recon_mse) << " (mean-action baseline "
      << num(heldout.baseline_mse) << "), wrote " << args.out << "\n";
}

double recompute_heldout_mse(const std::string& codec_path, const std::string& demos_path,
                             std::uint64_t seed) {
  const env::DemoBuffer demos = env::load_demos(demos_path);
  const env::Env e = env::Env::make(demos.env_id);
  const latent::ActionCodec codec = load_codec_for(codec_path, e);
  const auto held = latent::heldout_indices(demos.size(), seed);
  nn::Matrix hs(demos.state_dim, static_cast<Eigen::Index>(held.size()));
  nn::Matrix ha(demos.action_dim, static_cast<Eigen::Index>(held.size()));
  for (std::size_t i = 0; i < held.size(); ++i) {
    hs.col(static_cast<Eigen::Index>(i)) = demos.transitions[held[i]].state;
    ha.col(static_cast<Eigen::Index>(i)) = demos.transitions[held[i]].action;
  }
  return latent::evaluate_codec(codec, hs, ha).heldout_recon_mse;
}

void cmd_train(const TrainArgs& args, std::ostream& log) {
  const orch::RunConfig& run = args.config.run;
  require_path(args.demos, "--demos");
  require_path(args.out, "--out");
  if (orch::is_lapal(run.algo) && !args.codec) {
    throw ConfigError(orch::to_string(run.algo) + " needs --codec");
  }
  if (!orch::is_lapal(run.algo) && args.codec) throw ConfigError("gail does not use a codec");
  if (args.config.seeds.empty()) throw ConfigError("at least one seed is required");
  if (args.jobs < 1) throw ConfigError("--jobs must be at least 1");
  run.validate();

  const env::DemoBuffer demos = env::load_demos(args.demos);
  const env::Env e = env::Env::make(run.env_id);
  if (demos.env_id != run.env_id) {
    throw ConfigError("demos are from " + demos.env_id + " but the run uses " + run.env_id);
  }
  std::optional<latent::ActionCodec> codec;
  if (args.codec) codec = load_codec_for(*args.codec, e);

  const auto& seeds = args.config.seeds;
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::mutex log_mutex;
  auto run_seed = [&](std::size_t i) {
    SeedOutcome& o = outcomes[i];
    o.seed = seeds[i];
    const std::string dir = join_path(args.out, "seed_" + std::to_string(o.seed));
    try {
      orch::RunResult r = orch::run_training(run, demos, codec, o.seed);
      write_file_atomic(join_path(dir, "curve.csv"), r.curve.to_csv());
      write_file_atomic(join_path(dir, "initial.ckpt"), r.initial.bytes);
      write_file_atomic(join_path(dir, "final.ckpt"), r.final.bytes);
      o.curve = std::move(r.curve);
    } catch (const orch::DivergenceError& err) {
      o.diverged = true;
      o.error = err.what();
      write_file_atomic(join_path(dir, "diagnostics.txt"), err.diagnostics());
    }
    std::lock_guard<std::mutex> lock(log_mutex);
    if (o.diverged) {
      log << "seed " << o.seed << ": diverged: " << o.error << "\n";
    } else if (!o.curve.rows.empty()) {
      log << "seed " << o.seed << ": final normalized return "
          << fixed(o.curve.rows.back().normalized_return, 4) << "\n";
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(args.jobs), seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_seed(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mutex;
    std::exception_ptr failure;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= seeds.size() || failure) return;
            i = next++;
          }
          try {
            run_seed(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<orch::LearningCurve> curves;
  for (const auto& o : outcomes) {
    if (!o.diverged) curves.push_back(o.curve);
  }
  write_file_atomic(join_path(args.out, "aggregate.csv"), aggregate_to_csv(aggregate_curves(curves)));
  const std::string config_text = serialize_config(args.config);
  write_file_atomic(join_path(args.out, "config.ini"), config_text);

  nlohmann::ordered_json manifest;
  manifest["tool"] = "lapal";
  manifest["version"] = kVersion;
  manifest["command"] = "train";
  manifest["algo"] = orch::to_string(run.algo);
  manifest["env_id"] = run.env_id;
  manifest["seeds"] = seeds;
  manifest["demos"] = {{"path", fs::path(args.demos).filename().string()},
                       {"digest", hex64(demos.digest())}};
  if (args.codec) {
    manifest["codec"] = {{"path", fs::path(*args.codec).filename().string()},
                         {"digest", hex64(codec->digest())}};
  } else {
    manifest["codec"] = nullptr;
  }
  manifest["config"] = config_text;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& o : outcomes) {
    nlohmann::ordered_json r;
    r["seed"] = o.seed;
    r["status"] = o.diverged ? "diverged" : "completed";
    r["dir"] = "seed_" + std::to_string(o.seed);
    if (o.diverged) {
      r["error"] = o.error;
    } else if (!o.curve.rows.empty()) {
      r["final_env_steps"] = o.curve.rows.back().env_steps;
      r["final_normalized_return"] = num(o.curve.rows.back().normalized_return);
      r["expert_return"] = num(o.curve.reference.expert);
      r["random_return"] = num(o.curve.reference.random);
    }
    runs.push_back(r);
  }
  manifest["runs"] = runs;
  write_file_atomic(join_path(args.out, "manifest.json"), manifest.dump(2) + "\n");

  std::size_t diverged = 0;
  for (const auto& o : outcomes) diverged += o.diverged ? 1 : 0;
  if (diverged > 0) {
    throw QualityError(std::to_string(diverged) + " of " + std::to_string(outcomes.size()) +
                       " seeds diverged; see seed_<s>/diagnostics.txt");
  }
}

void cmd_eval(const EvalArgs& args, std::ostream& out) {
  require_path(args.policy, "policy");
  if (args.episodes < 1) throw ConfigError("--episodes must be at least 1");
  orch::PolicyBundle policy;
  std::string env_id = args.env_id;
  if (args.policy == "expert" || args.policy == "random") {
    if (env_id.empty()) throw ConfigError("--env is required for the " + args.policy + " policy");
    policy = args.policy == "expert" ? orch::PolicyBundle::expert() : orch::PolicyBundle::random(0);
  } else {
    const orch::LoadedCheckpoint ckpt = orch::decode_checkpoint(read_file(args.policy));
    if (env_id.empty()) env_id = ckpt.env_id;
    policy = ckpt.policy();
  }
  const env::Env e = env::Env::make(env_id);
  const orch::EvalResult r = orch::evaluate_policy(policy, e, args.episodes, args.seed);
  out << "env: " << env_id << "\n";
  out << "episodes: " << args.episodes << "\n";
  out << "mean_return: " << fixed(r.mean, 4) << "\n";
  out << "std_return: " << fixed(r.std, 4) << "\n";
  if (args.out) {
    std::string csv = "episode,return\n";
    for (std::size_t i = 0; i < r.returns.size(); ++i) csv += std::to_string(i) + "," + num(r.returns[i]) + "\n";
    write_file_atomic(*args.out, csv);
  }
}

void cmd_transfer(const TransferArgs& args, std::ostream& out) {
  require_path(args.source, "--source");
  require_path(args.target_demos, "--demos");
  require_path(args.out, "--out");
  if (args.config.seeds.empty()) throw ConfigError("at least one seed is required");
  const orch::LoadedCheckpoint source = orch::decode_checkpoint(read_file(args.source));
  if (!orch::is_lapal(source.algo)) throw ConfigError("transfer needs a latent policy checkpoint");
  const env::DemoBuffer demos = env::load_demos(args.target_demos);
  const env::Env target = env::Env::make(demos.env_id);
  if (demos.env_digest != target.digest()) {
    throw ConfigError("demo file " + args.target_demos + " was recorded on a different " + demos.env_id);
  }
  const env::EnvSpec from = env::Env::make(source.env_id).spec();
  if (from.state_dim != target.spec().state_dim || from.action_dim != target.spec().action_dim) {
    throw ConfigError("source env " + source.env_id + " and target env " + demos.env_id +
                      " differ in state or action dimension");
  }

  const orch::ReturnReference ref = orch::reference_returns(target, args.episodes);
  const double source_return = orch::evaluate_policy(source.policy(), target, args.episodes, orch::kEvalSeed).mean;

  std::string csv =
      "seed,source_return,transferred_return,expert_return,source_normalized,transferred_normalized\n";
  out << "source: " << source.env_id << " -> target: " << demos.env_id << "\n";
  out << "seed | Source policy | Transferred policy | Expert policy\n";
  for (std::uint64_t seed : args.config.seeds) {
    const orch::TransferResult t = orch::transfer_policy(source.agent, demos, args.config.run.cvae, seed);
    const double transferred = orch::evaluate_policy(t.policy, target, args.episodes, orch::kEvalSeed).mean;
    latent::save_codec(join_path(args.out, "codec_seed_" + std::to_string(seed) + ".bin"), t.target_codec.codec);
    csv += std::to_string(seed) + "," + num(source_return) + "," + num(transferred) + "," + num(ref.expert) + "," +
           num(ref.normalize(source_return)) + "," + num(ref.normalize(transferred)) + "\n";
    out << seed << " | " << fixed(source_return, 2) << " | " << fixed(transferred, 2) << " | "
        << fixed(ref.expert, 2) << "\n";
  }
  write_file_atomic(join_path(args.out, "transfer.csv"), csv);
}

void cmd_plot(const PlotArgs& args, std::ostream& log) {
  require_path(args.out, "--out");
  if (args.inputs.empty()) throw ConfigError("plot needs at least one curve CSV");
  std::vector<PlotSeries> series;
  for (const auto& input : args.inputs) {
    PlotSeries s;
    std::string path = input;
    if (const auto eq = input.find('='); eq != std::string::npos) {
      s.label = input.substr(0, eq);
      path = input.substr(eq + 1);
    } else {
      s.label = fs::path(path).parent_path().filename().string();
      if (s.label.empty()) s.label = fs::path(path).stem().string();
    }
    try {
      s.rows = aggregate_from_csv(read_file(path));
    } catch (const IoError& e) {
      throw IoError(path + ": " + e.what());
    }
    series.push_back(std::move(s));
  }
  const std::string raw = render_svg(series, false, args.title);
  const std::string normalized = render_svg(series, true, args.title + " (expert-normalized)");
  const fs::path out(args.out);
  const fs::path norm_path = out.parent_path() / (out.stem().string() + "_normalized.svg");
  write_file_atomic(out.string(), raw);
  write_file_atomic(norm_path.string(), normalized);
  log << "wrote " << out.string() << " and " << norm_path.string() << "\n";
}

}  // namespace lapal::cli
