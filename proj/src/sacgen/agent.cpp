#include "lapal/sacgen/agent.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lapal/common/errors.hpp"
#include "lapal/nncore/checkpoint.hpp"
#include "lapal/nncore/gaussian.hpp"

namespace lapal::sac {

namespace {

constexpr char kAgentMagic[4] = {'L', 'P', 'S', 'A'};
constexpr std::uint32_t kAgentVersion = 1;
constexpr double kSquashMax = 1.0 - 0x1p-53;
constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // 0.5 log(2 pi)
constexpr double kLogStdHalfRange = 0.5 * (kActorLogStdMax - kActorLogStdMin);

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

nn::MlpSpec make_spec(int in, const std::vector<int>& hidden, int out, nn::Activation act) {
  nn::MlpSpec s;
  s.input_dim = in;
  s.hidden = hidden;
  s.output_dim = out;
  s.activation = act;
  s.output_activation = nn::Activation::kIdentity;
  return s;
}

void write_hidden(BinaryWriter& w, const std::vector<int>& hidden) {
  w.u32(static_cast<std::uint32_t>(hidden.size()));
  for (int h : hidden) w.u32(static_cast<std::uint32_t>(h));
}

std::vector<int> read_hidden(BinaryReader& r) {
  const std::uint32_t n = r.u32();
  if (n == 0 || n > 64) throw IoError("agent checkpoint has a bad layer count");
  std::vector<int> hidden(n);
  for (auto& h : hidden) h = static_cast<int>(r.u32());
  return hidden;
}

void write_config(BinaryWriter& w, const SacConfig& c) {
  write_hidden(w, c.actor_hidden);
  write_hidden(w, c.critic_hidden);
  w.str(nn::to_string(c.activation));
  w.f64(c.gamma);
  w.f64(c.tau);
  w.f64(c.actor_lr);
  w.f64(c.critic_lr);
  w.f64(c.alpha_lr);
  w.f64(c.init_log_alpha);
  w.u32(c.auto_alpha ? 1 : 0);
  w.f64(c.target_entropy);
}

SacConfig read_config(BinaryReader& r) {
  SacConfig c;
  c.actor_hidden = read_hidden(r);
  c.critic_hidden = read_hidden(r);
  try {
    c.activation = nn::activation_from_string(r.str());
  } catch (const ConfigError& e) {
    throw IoError(std::string("agent checkpoint: ") + e.what());
  }
  c.gamma = r.f64();
  c.tau = r.f64();
  c.actor_lr = r.f64();
  c.critic_lr = r.f64();
  c.alpha_lr = r.f64();
  c.init_log_alpha = r.f64();
  c.auto_alpha = r.u32() != 0;
  c.target_entropy = r.f64();
  return c;
}

}  // namespace

void SacConfig::validate() const {
  if (actor_hidden.empty() || critic_hidden.empty()) {
    throw ConfigError("actor and critic need at least one hidden layer");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
  if (!(actor_lr >= 0.0) || !(critic_lr >= 0.0) || !(alpha_lr >= 0.0)) {
    throw ConfigError("learning rates must be >= 0");
  }
  if (!std::isfinite(init_log_alpha)) throw ConfigError("init_log_alpha must be finite");
}

Matrix tanh_gaussian_log_prob(const Matrix& mean, const Matrix& log_std, const Matrix& u) {
  const Matrix x = u.array().atanh();
  const Matrix z = (x - mean).array() / log_std.array().exp();
  const Matrix per = -0.5 * z.array().square() - log_std.array() - kHalfLogTwoPi -
                     (1.0 - u.array().square()).log();
  return per.colwise().sum();
}

SacAgent::SacAgent(int state_dim, int u_dim, int critic_action_dim, SacConfig config, Rng& rng)
    : state_dim_(state_dim),
      u_dim_(u_dim),
      critic_action_dim_(critic_action_dim),
      config_(std::move(config)) {
  config_.validate();
  if (state_dim <= 0 || u_dim <= 0 || critic_action_dim <= 0) {
    throw ConfigError("agent dims must be positive");
  }
  actor_ = nn::Mlp(make_spec(state_dim, config_.actor_hidden, 2 * u_dim, config_.activation), rng);
  const nn::MlpSpec cs =
      make_spec(state_dim + critic_action_dim, config_.critic_hidden, 1, config_.activation);
  critic1_ = nn::Mlp(cs, rng);
  critic2_ = nn::Mlp(cs, rng);
  target1_ = critic1_;
  target2_ = critic2_;
  target1_.params().adam_step = 0;
  target2_.params().adam_step = 0;
  log_alpha_ = config_.init_log_alpha;
}

double SacAgent::target_entropy() const {
  return std::isnan(config_.target_entropy) ? -static_cast<double>(u_dim_)
                                            : config_.target_entropy;
}

PolicySample SacAgent::sample(const Matrix& states, const Matrix& noise, bool deterministic) const {
  if (states.rows() != state_dim_) {
    throw ConfigError("actor expects " + std::to_string(state_dim_) + "-dim states, got " +
                      std::to_string(states.rows()));
  }
  if (!states.allFinite()) throw NumericError("actor input is not finite");
  PolicySample ps;
  const Matrix raw = actor_.forward(states, &ps.tape);
  ps.mean = raw.topRows(u_dim_);
  ps.raw_log_std = raw.bottomRows(u_dim_);
  ps.log_std = (kActorLogStdMin + kLogStdHalfRange * (ps.raw_log_std.array().tanh() + 1.0)).matrix();
  if (deterministic) {
    ps.noise = Matrix::Zero(u_dim_, states.cols());
  } else {
    if (noise.rows() != u_dim_ || noise.cols() != states.cols()) {
      throw ConfigError("policy noise must be u_dim x batch");
    }
    ps.noise = noise;
  }
  ps.pre_tanh = ps.mean + (ps.log_std.array().exp() * ps.noise.array()).matrix();
  ps.u = ps.pre_tanh.array().tanh().min(kSquashMax).max(-kSquashMax).matrix();
  Matrix per = -0.5 * ps.noise.array().square() - ps.log_std.array() - kHalfLogTwoPi;
  per -= ps.pre_tanh.unaryExpr([](double x) { return nn::log1m_tanh_sq(x); });
  ps.log_prob = per.colwise().sum();
  return ps;
}

Matrix SacAgent::act(const Matrix& states, bool deterministic, Rng& rng) const {
  const Matrix noise = deterministic ? Matrix() : standard_normal(u_dim_, states.cols(), rng);
  return sample(states, noise, deterministic).u;
}

Vector SacAgent::act_one(const Vector& state, bool deterministic, Rng& rng) const {
  return act(state, deterministic, rng).col(0);
}

Matrix SacAgent::q_values(int which, const Matrix& states, const Matrix& c) const {
  return critic(which).forward(stack(states, c));
}

Matrix SacAgent::target_q_values(int which, const Matrix& states, const Matrix& c) const {
  return target(which).forward(stack(states, c));
}

Matrix SacAgent::td_targets(const Matrix& rewards, const Matrix& next_states,
                            const Matrix& next_noise, const ActionChain& chain) const {
  const PolicySample next = sample(next_states, next_noise);
  const Matrix c2 = chain.forward(next_states, next.u, nullptr);
  const Matrix in = stack(next_states, c2);
  const Matrix tq = target1_.forward(in).cwiseMin(target2_.forward(in));
  return rewards + config_.gamma * (tq - alpha() * next.log_prob);
}

CriticStats SacAgent::critic_loss(const Matrix& states, const Matrix& c, const Matrix& targets,
                                  bool grad) {
  const Matrix in = stack(states, c);
  const auto n = static_cast<double>(states.cols());
  CriticStats st;
  st.mean_target = targets.mean();
  for (int i = 0; i < 2; ++i) {
    nn::Tape tape;
    const Matrix q = critic(i).forward(in, grad ? &tape : nullptr);
    const Matrix diff = q - targets;
    const double loss = 0.5 * diff.squaredNorm() / n;
    (i == 0 ? st.loss1 : st.loss2) = loss;
    if (i == 0) st.mean_q = q.mean();
    if (grad) critic(i).backward(tape, diff / n, true);
  }
  return st;
}

CriticStats SacAgent::critic_update(const Matrix& states, const Matrix& c, const Matrix& rewards,
                                    const Matrix& next_states, const ActionChain& chain, Rng& rng) {
  if (states.cols() == 0) throw StateError("critic update needs a non-empty batch");
  const Matrix noise = standard_normal(u_dim_, next_states.cols(), rng);
  const Matrix y = td_targets(rewards, next_states, noise, chain);
  const CriticStats st = critic_loss(states, c, y, true);
  if (!std::isfinite(st.loss1) || !std::isfinite(st.loss2)) {
    std::ostringstream msg;
    msg << "critic loss became non-finite (" << st.loss1 << ", " << st.loss2 << ")";
    throw NumericError(msg.str());
  }
  const nn::AdamConfig cfg{config_.critic_lr};
  nn::adam_step(critic1_.params(), cfg);
  nn::adam_step(critic2_.params(), cfg);
  polyak(config_.tau);
  return st;
}

ActorStats SacAgent::actor_loss(const Matrix& states, const Matrix& noise, ActionChain& chain,
                                bool grad, Matrix* log_prob_out) {
  const PolicySample ps = sample(states, noise);
  std::unique_ptr<ChainTape> ctape;
  const Matrix c = chain.forward(states, ps.u, grad ? &ctape : nullptr);
  const Matrix in = stack(states, c);
  nn::Tape t1, t2;
  const Matrix q1 = critic1_.forward(in, grad ? &t1 : nullptr);
  const Matrix q2 = critic2_.forward(in, grad ? &t2 : nullptr);
  const Matrix qmin = q1.cwiseMin(q2);
  const auto n = static_cast<double>(states.cols());
  const double a = alpha();

  ActorStats st;
  st.loss = (a * ps.log_prob - qmin).sum() / n;
  st.entropy = -ps.log_prob.mean();
  st.alpha = a;
  st.mean_q = qmin.mean();
  if (log_prob_out) *log_prob_out = ps.log_prob;
  if (!grad) return st;

  // The minimum routes each column's gradient to the smaller critic.
  const Matrix pick1 = (q1.array() <= q2.array()).cast<double>();
  const Matrix up1 = -pick1 / n;
  const Matrix up2 = -(1.0 - pick1.array()).matrix() / n;
  const Matrix d_c = (critic1_.input_grad(t1, up1) + critic2_.input_grad(t2, up2))
                         .bottomRows(critic_action_dim_);
  const Matrix d_u = chain.backward(*ctape, d_c);

  // u = tanh(x), x = mean + sigma * eps; -log(1 - tanh(x)^2) has derivative 2 tanh(x).
  const Matrix one_minus_u2 = 1.0 - ps.u.array().square();
  const Matrix d_x = d_u.array() * one_minus_u2.array() + (2.0 * a / n) * ps.u.array();
  const Matrix sigma_eps = ps.log_std.array().exp() * ps.noise.array();
  const Matrix d_log_std = d_x.array() * sigma_eps.array() - a / n;
  const Matrix d_raw_ls =
      d_log_std.array() * kLogStdHalfRange * (1.0 - ps.raw_log_std.array().tanh().square());
  actor_.backward(ps.tape, stack(d_x, d_raw_ls), true);
  return st;
}

ActorStats SacAgent::actor_update(const Matrix& states, ActionChain& chain, Rng& rng) {
  const Matrix noise = standard_normal(u_dim_, states.cols(), rng);
  Matrix log_prob;
  const ActorStats st = actor_loss(states, noise, chain, true, &log_prob);
  if (!std::isfinite(st.loss)) {
    throw NumericError("actor loss became non-finite (" + std::to_string(st.loss) + ")");
  }
  nn::adam_step(actor_.params(), {config_.actor_lr});
  if (config_.auto_alpha) alpha_update(log_prob);
  return st;
}

double SacAgent::alpha_gradient(const Matrix& log_prob) const {
  return -(log_prob.array() + target_entropy()).mean();
}

void SacAgent::alpha_update(const Matrix& log_prob) {
  const double g = alpha_gradient(log_prob);
  if (!std::isfinite(g)) throw NumericError("temperature gradient is not finite");
  log_alpha_ = alpha_opt_.update(log_alpha_, g, {config_.alpha_lr});
}

void SacAgent::polyak(double tau) {
  for (int i = 0; i < 2; ++i) {
    auto& src = critic(i).params().layers;
    auto& dst = target(i).params().layers;
    for (std::size_t l = 0; l < src.size(); ++l) {
      dst[l].weights = tau * src[l].weights + (1.0 - tau) * dst[l].weights;
      dst[l].biases = tau * src[l].biases + (1.0 - tau) * dst[l].biases;
    }
  }
}

std::uint64_t SacAgent::digest() const {
  BinaryWriter w;
  w.u32(static_cast<std::uint32_t>(state_dim_));
  w.u32(static_cast<std::uint32_t>(u_dim_));
  w.u32(static_cast<std::uint32_t>(critic_action_dim_));
  write_config(w, config_);
  for (const nn::Mlp* m : {&actor_, &critic1_, &critic2_, &target1_, &target2_}) {
    w.u64(m->params().digest());
  }
  w.f64(log_alpha_);
  return fnv1a(w.data());
}

void SacAgent::write(BinaryWriter& out) const {
  out.bytes(std::string_view(kAgentMagic, 4));
  out.u32(kAgentVersion);
  out.u32(static_cast<std::uint32_t>(state_dim_));
  out.u32(static_cast<std::uint32_t>(u_dim_));
  out.u32(static_cast<std::uint32_t>(critic_action_dim_));
  write_config(out, config_);
  out.f64(log_alpha_);
  out.f64(alpha_opt_.m);
  out.f64(alpha_opt_.v);
  out.i64(alpha_opt_.step);
  for (const nn::Mlp* m : {&actor_, &critic1_, &critic2_, &target1_, &target2_}) {
    nn::write_segment(out, *m);
  }
}

SacAgent SacAgent::read(BinaryReader& in, int state_dim, int u_dim, int critic_action_dim) {
  if (in.bytes(4) != std::string_view(kAgentMagic, 4)) throw IoError("not an agent checkpoint");
  const std::uint32_t version = in.u32();
  if (version != kAgentVersion) {
    throw IoError("unsupported agent checkpoint version " + std::to_string(version));
  }
  const int sd = static_cast<int>(in.u32());
  const int ud = static_cast<int>(in.u32());
  const int cd = static_cast<int>(in.u32());
  if (sd != state_dim || ud != u_dim || cd != critic_action_dim) {
    throw IoError("agent checkpoint dims " + std::to_string(sd) + "/" + std::to_string(ud) + "/" +
                  std::to_string(cd) + " do not match the run");
  }
  SacConfig config = read_config(in);
  Rng rng(0);
  SacAgent agent(sd, ud, cd, config, rng);
  agent.log_alpha_ = in.f64();
  agent.alpha_opt_.m = in.f64();
  agent.alpha_opt_.v = in.f64();
  agent.alpha_opt_.step = in.i64();
  for (nn::Mlp* m : {&agent.actor_, &agent.critic1_, &agent.critic2_, &agent.target1_,
                     &agent.target2_}) {
    nn::read_segment(in, *m);
  }
  return agent;
}

}  // namespace lapal::sac
