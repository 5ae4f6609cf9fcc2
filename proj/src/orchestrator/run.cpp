#include "lapal/orchestrator/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lapal/common/errors.hpp"
#include "lapal/common/log.hpp"
#include "lapal/orchestrator/latent_chain.hpp"
#include "lapal/sacgen/replay.hpp"

namespace lapal::orch {

namespace {

constexpr char kCheckpointMagic[] = "LPRC";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr Eigen::Index kReconProbe = 1000;
// Floor for per-dimension state scales (e.g. a goal coordinate that is
// constant across the corpus).
constexpr double kMinStateScale = 1e-3;

// Stream ids for derive_seed(run seed, id). Each phase owns a stream so that
// the three algorithms consume identical randomness where they coincide.
enum Stream : std::uint64_t { kInit = 0, kCollect = 1, kDisc = 2, kGen = 3, kCodec = 4 };

// Steps the environment with the current stochastic policy and stores raw
// transitions together with the policy's emitted output.
class Collector {
 public:
  Collector(const env::Env& env, const sac::SacAgent& agent, const latent::ActionCodec* codec,
            std::int64_t warmup_steps, std::uint64_t episode_base, Rng& rng)
      : env_(env), agent_(agent), codec_(codec), warmup_(warmup_steps),
        episode_base_(episode_base), rng_(rng),
        state_(env.reset(env::episode_seed(episode_base, 0))) {}

  void collect(std::int64_t n, std::int64_t& env_steps, sac::ReplayBuffer& replay) {
    const auto& spec = env_.spec();
    for (std::int64_t k = 0; k < n; ++k) {
      const env::Vector u = env_steps < warmup_
                                ? env::Vector(uniform_matrix(agent_.u_dim(), 1, -1.0, 1.0, rng_))
                                : agent_.act_one(state_, false, rng_);
      const env::Vector a = env_.clamp_action(
          codec_ ? codec_->decode_one(state_, u) : env::Vector(scale_to_box(spec, u)));
      const env::StepResult sr = env_.step(state_, a, t_);
      replay.push(state_, a, u, sr.next_state, sr.done);
      ++env_steps;
      if (sr.done) {
        state_ = env_.reset(env::episode_seed(episode_base_, ++episode_));
        t_ = 0;
      } else {
        state_ = sr.next_state;
        ++t_;
      }
    }
  }

 private:
  const env::Env& env_;
  const sac::SacAgent& agent_;
  const latent::ActionCodec* codec_;
  std::int64_t warmup_;
  std::uint64_t episode_base_;
  Rng& rng_;
  env::Vector state_;
  int episode_ = 0;
  int t_ = 0;
};

Matrix gather_cols(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

double mean_of(const std::vector<double>& v, std::size_t from = 0) {
  if (v.size() <= from) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(v.size() - from);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void check_demos(const env::Env& env, const env::DemoBuffer& demos) {
  demos.validate();
  if (demos.env_id != env.spec().id) {
    throw ConfigError("demos were recorded on " + demos.env_id + ", not " + env.spec().id);
  }
  if (demos.env_digest != env.digest()) {
    throw ConfigError("demos were recorded on a different " + env.spec().id + " instance");
  }
}

void check_codec(const env::EnvSpec& spec, const latent::ActionCodec& codec) {
  if (codec.state_dim() != spec.state_dim || codec.action_dim() != spec.action_dim ||
      codec.action_low() != spec.action_low || codec.action_high() != spec.action_high) {
    throw ConfigError("codec dimensions or action box do not match " + spec.id);
  }
}

}  // namespace

std::string to_string(Algo a) {
  switch (a) {
    case Algo::kGail: return "gail";
    case Algo::kLapalAgnostic: return "lapal_agnostic";
    case Algo::kLapalAware: return "lapal_aware";
  }
  return "?";
}

Algo algo_from_string(const std::string& name) {
  if (name == "gail") return Algo::kGail;
  if (name == "lapal_agnostic" || name == "lapal-agnostic") return Algo::kLapalAgnostic;
  if (name == "lapal_aware" || name == "lapal-aware") return Algo::kLapalAware;
  throw ConfigError("unknown algorithm '" + name + "' (gail, lapal-agnostic, lapal-aware)");
}

void RunConfig::validate() const {
  if (total_env_steps < 0) throw ConfigError("total_env_steps must be >= 0");
  if (steps_per_iteration <= 0) throw ConfigError("steps_per_iteration must be positive");
  if (disc_updates_per_iteration < 0 || gen_updates_per_iteration < 0) {
    throw ConfigError("update counts must be >= 0");
  }
  if (eval_every <= 0) throw ConfigError("eval_every must be positive");
  if (eval_episodes <= 0) throw ConfigError("eval_episodes must be positive");
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch_size must be even and >= 2");
  if (disc_hidden.empty()) throw ConfigError("discriminator needs a hidden layer");
  if (!(disc_lr >= 0.0) || !(encoder_lr >= 0.0) || !(decoder_lr >= 0.0)) {
    throw ConfigError("learning rates must be >= 0");
  }
  if (replay_capacity == 0) throw ConfigError("replay_capacity must be positive");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
  if (reuse_emitted_latents && algo != Algo::kLapalAgnostic) {
    throw ConfigError("reuse_emitted_latents is only meaningful with a frozen codec (lapal_agnostic)");
  }
  if (!(aux_recon_weight >= 0.0)) throw ConfigError("aux_recon_weight must be >= 0");
  if (aux_recon_weight > 0.0 && algo != Algo::kLapalAware) {
    throw ConfigError("aux_recon_weight requires lapal_aware");
  }
  sac.validate();
  cvae.validate();
}

std::optional<std::int64_t> LearningCurve::steps_to_reach(double normalized) const {
  for (const auto& r : rows) {
    if (r.normalized_return >= normalized) return r.env_steps;
  }
  return std::nullopt;
}

const std::vector<std::string>& LearningCurve::csv_columns() {
  static const std::vector<std::string> cols{
      "env_steps",   "mean_return", "std_return", "normalized_return", "disc_loss",
      "critic_loss", "actor_loss",  "alpha",      "recon_mse",         "agent_digest",
      "disc_digest", "codec_digest"};
  return cols;
}

std::string LearningCurve::to_csv() const {
  std::ostringstream out;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    out << r.env_steps << ',' << fmt(r.mean_return) << ',' << fmt(r.std_return) << ','
        << fmt(r.normalized_return) << ',' << fmt(r.disc_loss) << ',' << fmt(r.critic_loss) << ','
        << fmt(r.actor_loss) << ',' << fmt(r.alpha) << ',' << fmt(r.recon_mse) << ','
        << hex64(r.agent_digest) << ',' << hex64(r.disc_digest) << ',' << hex64(r.codec_digest)
        << '\n';
  }
  return out.str();
}

std::string encode_checkpoint(Algo algo, const std::string& env_id, std::int64_t env_steps,
                              const sac::SacAgent& agent, const adv::Discriminator& disc,
                              const latent::ActionCodec* codec) {
  if (is_lapal(algo) != (codec != nullptr)) {
    throw ConfigError("lapal checkpoints carry a codec and gail checkpoints do not");
  }
  BinaryWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(algo));
  w.str(env_id);
  w.i64(env_steps);
  w.u32(codec ? 1 : 0);
  if (codec) codec->write(w);
  w.u32(static_cast<std::uint32_t>(agent.u_dim()));
  agent.write(w);
  w.u64(disc.input().codec_digest);
  disc.write(w);
  return w.data();
}

LoadedCheckpoint decode_checkpoint(const std::string& bytes) {
  BinaryReader in(bytes);
  if (in.bytes(4) != kCheckpointMagic) throw IoError("not a run checkpoint (bad magic)");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported run checkpoint version " + std::to_string(version));
  }
  LoadedCheckpoint ck;
  const std::uint32_t algo = in.u32();
  if (algo > static_cast<std::uint32_t>(Algo::kLapalAware)) throw IoError("checkpoint names an unknown algorithm");
  ck.algo = static_cast<Algo>(algo);
  ck.env_id = in.str();
  ck.env_steps = in.i64();
  env::Env env = [&] {
    try {
      return env::Env::make(ck.env_id);
    } catch (const ConfigError& e) {
      throw IoError(std::string("checkpoint environment: ") + e.what());
    }
  }();
  const auto& spec = env.spec();
  const bool has_codec = in.u32() != 0;
  if (has_codec != is_lapal(ck.algo)) throw IoError("checkpoint codec flag disagrees with its algorithm");
  if (has_codec) {
    ck.codec = std::make_shared<latent::ActionCodec>(
        latent::ActionCodec::read(in, spec.state_dim, spec.action_low, spec.action_high));
  }
  const int u_dim = static_cast<int>(in.u32());
  const int expected_u = has_codec ? ck.codec->latent_dim() : spec.action_dim;
  if (u_dim != expected_u) throw IoError("checkpoint actor dimension does not match its codec");
  ck.agent = std::make_shared<sac::SacAgent>(sac::SacAgent::read(in, spec.state_dim, u_dim, u_dim));
  adv::InputDescriptor desc;
  desc.space = has_codec ? adv::InputSpace::kLatent : adv::InputSpace::kRaw;
  desc.state_dim = spec.state_dim;
  desc.action_dim = u_dim;
  desc.codec_digest = in.u64();
  if (ck.algo == Algo::kLapalAgnostic && desc.codec_digest != ck.codec->digest()) {
    throw IoError("checkpoint discriminator was trained against a different codec");
  }
  ck.disc = std::make_shared<adv::Discriminator>(adv::Discriminator::read(in, desc));
  if (!in.at_end()) throw IoError("trailing bytes after run checkpoint");
  return ck;
}

PolicyBundle LoadedCheckpoint::policy() const {
  if (codec) return PolicyBundle::latent_actor(agent, codec);
  return PolicyBundle::raw_actor(agent);
}

PolicyBundle RunResult::policy() const {
  if (codec) return PolicyBundle::latent_actor(agent, codec);
  return PolicyBundle::raw_actor(agent);
}

RunResult run_training(const RunConfig& config, const env::DemoBuffer& demos,
                       std::optional<latent::ActionCodec> codec_in, std::uint64_t seed,
                       const RunOptions& options) {
  config.validate();
  const env::Env env = env::Env::make(config.env_id);
  const auto& spec = env.spec();
  check_demos(env, demos);
  const bool lapal = is_lapal(config.algo);
  const bool aware = config.algo == Algo::kLapalAware;

  RunResult result;
  result.demo_digest_before = demos.digest();
  result.curve.reference = reference_returns(env, config.eval_episodes, config.eval_seed);
  const ReturnReference& ref = result.curve.reference;

  Rng init_rng(derive_seed(seed, kInit));
  Rng collect_rng(derive_seed(seed, kCollect));
  Rng disc_rng(derive_seed(seed, kDisc));
  Rng gen_rng(derive_seed(seed, kGen));
  const std::uint64_t episode_base = derive_seed(seed, kCollect);

  if (lapal) {
    if (!codec_in) {
      if (config.skip_codec_pretraining) {
        Rng codec_rng(derive_seed(seed, kCodec));
        codec_in.emplace(spec.state_dim, spec.action_low, spec.action_high, config.cvae, codec_rng);
      } else {
        log_info("pretraining codec on " + std::to_string(demos.size()) + " expert pairs");
        codec_in = latent::train_codec(demos, spec.action_low, spec.action_high, config.cvae,
                                       derive_seed(seed, kCodec))
                       .codec;
      }
    }
    check_codec(spec, *codec_in);
    result.codec = std::make_shared<latent::ActionCodec>(std::move(*codec_in));
    result.codec->set_frozen(!aware);
    result.codec->zero_grad();
    result.codec_digest_before = result.codec->digest();
  } else if (codec_in) {
    throw ConfigError("gail runs in the raw action space and takes no codec");
  }
  latent::ActionCodec* codec = result.codec.get();
  const int u_dim = lapal ? codec->latent_dim() : spec.action_dim;

  result.agent = std::make_shared<sac::SacAgent>(spec.state_dim, u_dim, u_dim, config.sac, init_rng);
  adv::InputDescriptor desc;
  desc.space = lapal ? adv::InputSpace::kLatent : adv::InputSpace::kRaw;
  desc.state_dim = spec.state_dim;
  desc.action_dim = u_dim;
  desc.codec_digest = lapal ? result.codec_digest_before : 0;
  result.disc = std::make_shared<adv::Discriminator>(desc, config.disc_hidden, init_rng);
  if (config.normalize_disc_states) {
    const Matrix s = demos.states();
    const Vector mean = s.rowwise().mean();
    const Vector sd = ((s.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
    result.disc->set_state_normalizer(mean, sd.cwiseMax(kMinStateScale));
  }
  sac::SacAgent& agent = *result.agent;
  adv::Discriminator& disc = *result.disc;

  std::unique_ptr<sac::ActionChain> chain;
  if (lapal && !config.reuse_emitted_latents) {
    chain = std::make_unique<LatentChain>(*codec, aware);
  } else {
    chain = std::make_unique<sac::IdentityChain>(u_dim);
  }

  auto checkpoint = [&](std::int64_t steps) {
    return RunCheckpoint{steps, encode_checkpoint(config.algo, spec.id, steps, agent, disc, codec)};
  };
  result.initial = checkpoint(0);
  if (config.total_env_steps == 0) return result;

  const Matrix demo_s = demos.states();
  const Matrix demo_a = demos.actions();
  const Eigen::Index n_demo = demo_s.cols();
  const Eigen::Index n_probe = std::min(n_demo, kReconProbe);
  std::uniform_int_distribution<Eigen::Index> demo_index(0, n_demo - 1);

  sac::ReplayBuffer replay(config.replay_capacity, spec.state_dim, spec.action_dim, u_dim);
  const nn::AdamConfig disc_adam{config.disc_lr};
  const nn::AdamConfig enc_adam{config.encoder_lr};
  const nn::AdamConfig dec_adam{config.decoder_lr};
  const int half = config.batch_size / 2;
  const int L = u_dim;

  // Latents the discriminator sees for a batch of raw pairs. Records an encoder
  // tape when the encoder is trained.
  auto disc_inputs = [&](const Matrix& s, const Matrix& a, const Matrix* emitted, bool expert,
                         latent::EncodeTape* tape) -> Matrix {
    if (!lapal) return normalize_from_box(spec, a);
    if (emitted) return *emitted;
    const latent::BatchGaussian g = codec->encode(s, a, tape);
    if (!(expert && config.cvae.sample_expert_latents)) return g.mean;
    const Matrix noise = standard_normal(L, s.cols(), disc_rng);
    return g.mean + (g.log_std.array().exp() * noise.array()).matrix();
  };

  // Optional reconstruction term on an expert minibatch, added to both codec nets.
  auto aux_recon = [&](Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(half));
    for (auto& i : idx) i = demo_index(rng);
    const Matrix noise = standard_normal(L, half, rng);
    codec->loss(gather_cols(demo_s, idx), gather_cols(demo_a, idx), noise, true,
                config.aux_recon_weight);
  };

  Collector collector(env, agent, codec, config.warmup_steps, episode_base, collect_rng);
  std::int64_t env_steps = 0;
  std::int64_t next_eval = config.eval_every;
  int iteration = 0;
  CurveRow last;

  auto diagnostics = [&](const std::string& reason) {
    std::ostringstream d;
    d << "reason: " << reason << "\nalgo: " << to_string(config.algo) << "\nenv: " << spec.id
      << "\nseed: " << seed << "\niteration: " << iteration << "\nenv_steps: " << env_steps
      << "\nlast_disc_loss: " << fmt(last.disc_loss) << "\nlast_critic_loss: "
      << fmt(last.critic_loss) << "\nlast_actor_loss: " << fmt(last.actor_loss)
      << "\nalpha: " << fmt(agent.alpha()) << "\nlast_normalized_return: "
      << fmt(last.normalized_return) << "\nexpert_return: " << fmt(ref.expert)
      << "\nrandom_return: " << fmt(ref.random) << '\n';
    return d.str();
  };
  auto diverge = [&](const std::string& reason) {
    throw DivergenceError("training diverged: " + reason, diagnostics(reason));
  };

  while (env_steps < config.total_env_steps) {
    if (options.max_iterations > 0 && iteration >= options.max_iterations) break;
    IterationTrace trace;

    // Collection with the current stochastic policy.
    collector.collect(std::min<std::int64_t>(config.steps_per_iteration,
                                             config.total_env_steps - env_steps),
                      env_steps, replay);

    try {
      // Discriminator phase; the encoder joins it in task-aware mode.
      for (int k = 0; k < config.disc_updates_per_iteration; ++k) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(half));
        for (auto& i : idx) i = demo_index(disc_rng);
        const Matrix es = gather_cols(demo_s, idx);
        const Matrix ea = gather_cols(demo_a, idx);
        const sac::ReplayBatch ab = replay.sample(static_cast<std::size_t>(half), disc_rng);
        latent::EncodeTape et_e, et_a;
        const Matrix eu = disc_inputs(es, ea, nullptr, true, aware ? &et_e : nullptr);
        const Matrix au = disc_inputs(ab.states, ab.actions,
                                      config.reuse_emitted_latents ? &ab.emitted : nullptr, false,
                                      aware ? &et_a : nullptr);
        const adv::DiscLoss dl = disc.loss_and_grad(es, eu, ab.states, au, true);
        if (!std::isfinite(dl.loss)) diverge("non-finite discriminator loss");
        disc.step(disc_adam);
        if (aware) {
          codec->encode_mean_backward(et_e, dl.d_expert_u, true);
          codec->encode_mean_backward(et_a, dl.d_agent_u, true);
          if (config.aux_recon_weight > 0.0) {
            aux_recon(disc_rng);
            codec->decoder().params().zero_grad();
          }
          codec->step_encoder(enc_adam);
        }
        trace.disc_losses.push_back(dl.loss);
      }

      // Generator phase; the decoder joins the actor in task-aware mode.
      for (int k = 0; k < config.gen_updates_per_iteration; ++k) {
        const sac::ReplayBatch b = replay.sample(static_cast<std::size_t>(config.batch_size), gen_rng);
        Matrix c;
        Matrix r_in;
        if (lapal) {
          c = config.reuse_emitted_latents ? b.emitted : codec->encode_mean(b.states, b.actions);
          r_in = c;
        } else {
          c = b.emitted;
          r_in = normalize_from_box(spec, b.actions);
        }
        const Matrix rewards = disc.reward(b.states, r_in);
        const sac::CriticStats cs = agent.critic_update(b.states, c, rewards, b.next_states, *chain, gen_rng);
        const sac::ActorStats as = agent.actor_update(b.states, *chain, gen_rng);
        if (!std::isfinite(cs.loss1) || !std::isfinite(cs.loss2)) diverge("non-finite critic loss");
        if (!std::isfinite(as.loss)) diverge("non-finite actor loss");
        if (aware) {
          if (config.aux_recon_weight > 0.0) {
            codec->encoder().params().zero_grad();
            aux_recon(gen_rng);
            codec->encoder().params().zero_grad();
          }
          codec->step_decoder(dec_adam);
        }
        trace.critic_losses.push_back(0.5 * (cs.loss1 + cs.loss2));
        trace.actor_losses.push_back(as.loss);
      }
    } catch (const NumericError& e) {
      diverge(std::string("numeric failure: ") + e.what());
    }
    ++iteration;

    last.disc_loss = mean_of(trace.disc_losses);
    last.critic_loss = mean_of(trace.critic_losses);
    last.actor_loss = mean_of(trace.actor_losses);
    last.alpha = agent.alpha();
    trace.env_steps = env_steps;
    trace.agent_digest = agent.digest();
    trace.disc_digest = disc.digest();
    trace.codec_digest = codec ? codec->digest() : 0;
    if (options.record_trace) result.trace.push_back(trace);

    if (env_steps >= next_eval || env_steps == config.total_env_steps) {
      while (next_eval <= env_steps) next_eval += config.eval_every;
      const EvalResult ev =
          evaluate_policy(result.policy(), env, config.eval_episodes, config.eval_seed);
      CurveRow row = last;
      row.env_steps = env_steps;
      row.mean_return = ev.mean;
      row.std_return = ev.std;
      row.normalized_return = ref.normalize(ev.mean);
      row.recon_mse = lapal ? latent::evaluate_codec(*codec, demo_s.leftCols(n_probe),
                                                     demo_a.leftCols(n_probe))
                                  .heldout_recon_mse
                            : std::numeric_limits<double>::quiet_NaN();
      row.agent_digest = trace.agent_digest;
      row.disc_digest = trace.disc_digest;
      row.codec_digest = trace.codec_digest;
      result.curve.rows.push_back(row);
      last = row;
      log_info(to_string(config.algo) + " " + spec.id + " seed " + std::to_string(seed) +
               " steps " + std::to_string(env_steps) + " return " + fmt(ev.mean) +
               " normalized " + fmt(row.normalized_return));
      if (config.divergence_guard && 2 * env_steps >= config.total_env_steps &&
          row.normalized_return < 0.0) {
        diverge("evaluation return fell below the random policy after half the budget");
      }
      if (options.on_eval && !options.on_eval(row)) break;
    }
  }

  result.final = checkpoint(env_steps);
  if (demos.digest() != result.demo_digest_before) throw StateError("expert demos were modified");
  return result;
}

LearningCurve run_sac_true_reward(const RunConfig& config, std::uint64_t seed,
                                  const RunOptions& options) {
  config.validate();
  const env::Env env = env::Env::make(config.env_id);
  const auto& spec = env.spec();
  LearningCurve curve;
  curve.reference = reference_returns(env, config.eval_episodes, config.eval_seed);

  Rng init_rng(derive_seed(seed, kInit));
  Rng collect_rng(derive_seed(seed, kCollect));
  Rng gen_rng(derive_seed(seed, kGen));
  auto agent = std::make_shared<sac::SacAgent>(spec.state_dim, spec.action_dim, spec.action_dim,
                                               config.sac, init_rng);
  sac::IdentityChain chain(spec.action_dim);
  sac::ReplayBuffer replay(config.replay_capacity, spec.state_dim, spec.action_dim, spec.action_dim);
  Collector collector(env, *agent, nullptr, config.warmup_steps, derive_seed(seed, kCollect),
                      collect_rng);

  std::int64_t env_steps = 0;
  std::int64_t next_eval = config.eval_every;
  int iteration = 0;
  while (env_steps < config.total_env_steps) {
    if (options.max_iterations > 0 && iteration >= options.max_iterations) break;
    collector.collect(std::min<std::int64_t>(config.steps_per_iteration,
                                             config.total_env_steps - env_steps),
                      env_steps, replay);
    std::vector<double> critic_losses, actor_losses;
    for (int k = 0; k < config.gen_updates_per_iteration; ++k) {
      const sac::ReplayBatch b = replay.sample(static_cast<std::size_t>(config.batch_size), gen_rng);
      Matrix rewards(1, b.states.cols());
      for (Eigen::Index j = 0; j < b.states.cols(); ++j) {
        rewards(0, j) = env.eval_reward(b.states.col(j), b.actions.col(j), b.next_states.col(j));
      }
      const sac::CriticStats cs = agent->critic_update(b.states, b.emitted, rewards, b.next_states, chain, gen_rng);
      const sac::ActorStats as = agent->actor_update(b.states, chain, gen_rng);
      critic_losses.push_back(0.5 * (cs.loss1 + cs.loss2));
      actor_losses.push_back(as.loss);
    }
    ++iteration;
    if (env_steps >= next_eval || env_steps == config.total_env_steps) {
      while (next_eval <= env_steps) next_eval += config.eval_every;
      const EvalResult ev = evaluate_policy(PolicyBundle::raw_actor(agent), env,
                                            config.eval_episodes, config.eval_seed);
      CurveRow row;
      row.env_steps = env_steps;
      row.mean_return = ev.mean;
      row.std_return = ev.std;
      row.normalized_return = curve.reference.normalize(ev.mean);
      row.disc_loss = std::numeric_limits<double>::quiet_NaN();
      row.critic_loss = mean_of(critic_losses);
      row.actor_loss = mean_of(actor_losses);
      row.alpha = agent->alpha();
      row.recon_mse = std::numeric_limits<double>::quiet_NaN();
      row.agent_digest = agent->digest();
      curve.rows.push_back(row);
      log_info("sac " + spec.id + " seed " + std::to_string(seed) + " steps " +
               std::to_string(env_steps) + " normalized " + fmt(row.normalized_return));
      if (options.on_eval && !options.on_eval(row)) break;
    }
  }
  return curve;
}

TransferResult transfer_policy(std::shared_ptr<const sac::SacAgent> source_actor,
                               const env::DemoBuffer& target_demos,
                               const latent::CvaeConfig& cvae_config, std::uint64_t seed) {
  if (!source_actor) throw ConfigError("transfer needs a source actor");
  if (source_actor->u_dim() != cvae_config.latent_dim) {
    throw ConfigError("source actor emits " + std::to_string(source_actor->u_dim()) +
                      "-dim latents but the target codec is configured for " +
                      std::to_string(cvae_config.latent_dim));
  }
  const env::Env env = env::Env::make(target_demos.env_id);
  check_demos(env, target_demos);
  if (source_actor->state_dim() != env.spec().state_dim) {
    throw ConfigError("source actor state dimension does not match " + env.spec().id);
  }
  TransferResult out{PolicyBundle{},
                     latent::train_codec(target_demos, env.spec().action_low,
                                         env.spec().action_high, cvae_config, seed)};
  out.target_codec.codec.set_frozen(true);
  out.policy = PolicyBundle::latent_actor(
      std::move(source_actor), std::make_shared<latent::ActionCodec>(out.target_codec.codec));
  return out;
}

}  // namespace lapal::orch
