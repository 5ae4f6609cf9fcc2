#include "lapal/envsim/demos.hpp"

#include <cstdio>
#include <random>
#include <sstream>

#include "lapal/common/binary_io.hpp"
#include "lapal/common/errors.hpp"
#include "lapal/common/rng.hpp"

namespace lapal::env {

namespace {
constexpr char kDemoMagic[4] = {'L', 'P', 'D', 'B'};
constexpr std::uint32_t kDemoVersion = 1;
}  // namespace

std::vector<double> DemoBuffer::episode_returns() const {
  std::vector<double> out;
  for (std::size_t e = 0; e < episode_starts.size(); ++e) {
    const std::size_t end = e + 1 < episode_starts.size() ? episode_starts[e + 1] : transitions.size();
    double r = 0.0;
    for (std::size_t i = episode_starts[e]; i < end; ++i) r += transitions[i].eval_reward;
    out.push_back(r);
  }
  return out;
}

Eigen::MatrixXd DemoBuffer::states() const {
  Eigen::MatrixXd m(state_dim, static_cast<Eigen::Index>(transitions.size()));
  for (std::size_t i = 0; i < transitions.size(); ++i) m.col(i) = transitions[i].state;
  return m;
}

Eigen::MatrixXd DemoBuffer::actions() const {
  Eigen::MatrixXd m(action_dim, static_cast<Eigen::Index>(transitions.size()));
  for (std::size_t i = 0; i < transitions.size(); ++i) m.col(i) = transitions[i].action;
  return m;
}

void DemoBuffer::validate() const {
  if (transitions.empty()) throw ConfigError("demo buffer is empty");
  for (const auto& t : transitions) {
    if (t.state.size() != state_dim || t.next_state.size() != state_dim ||
        t.action.size() != action_dim) {
      throw ConfigError("demo buffer transitions have inconsistent dimensions");
    }
  }
  if (episode_starts.empty() || episode_starts.front() != 0) {
    throw ConfigError("demo buffer episode boundaries must start at 0");
  }
}

std::uint64_t DemoBuffer::digest() const { return fnv1a(encode_demos(*this)); }

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return derive_seed(seed, static_cast<std::uint64_t>(episode));
}

double episode_return(const Env& env, const Policy& policy, std::uint64_t reset_seed) {
  Vector s = env.reset(reset_seed);
  double total = 0.0;
  for (int t = 0; t < env.spec().horizon; ++t) {
    StepResult r = env.step(s, policy(s, t), t);
    total += r.eval_reward;
    s = std::move(r.next_state);
  }
  return total;
}

double random_policy_return(const Env& env, int n_episodes, std::uint64_t seed) {
  double sum = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    const std::uint64_t es = episode_seed(seed, e);
    Rng rng(derive_seed(es, 0x7a4d));
    const EnvSpec& spec = env.spec();
    Policy uniform = [&](const Vector&, int) {
      Vector a(spec.action_dim);
      for (int i = 0; i < spec.action_dim; ++i) {
        std::uniform_real_distribution<double> u(spec.action_low(i), spec.action_high(i));
        a(i) = u(rng);
      }
      return a;
    };
    sum += episode_return(env, uniform, es);
  }
  return sum / n_episodes;
}

DemoQuality assess_demos(const Env& env, const DemoBuffer& demos, std::uint64_t seed) {
  DemoQuality q;
  int successes = 0;
  for (std::size_t e = 0; e < demos.episode_starts.size(); ++e) {
    const std::size_t end =
        e + 1 < demos.episode_starts.size() ? demos.episode_starts[e + 1] : demos.transitions.size();
    if (env.goal_distance(demos.transitions[end - 1].next_state) < env.params().success_radius) {
      ++successes;
    }
  }
  q.success_rate = static_cast<double>(successes) / demos.num_episodes();
  const auto returns = demos.episode_returns();
  double sum = 0.0;
  for (double r : returns) sum += r;
  q.expert_mean_return = sum / static_cast<double>(returns.size());
  q.random_mean_return = random_policy_return(env, demos.num_episodes(), seed);
  q.competence_factor = q.random_mean_return / q.expert_mean_return;
  q.accepted = q.success_rate >= kMinExpertSuccessRate;
  return q;
}

DemoBuffer collect_demos(const Env& env, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("collect_demos needs at least one episode");
  DemoBuffer demos;
  demos.env_id = env.spec().id;
  demos.env_digest = env.digest();
  demos.state_dim = env.spec().state_dim;
  demos.action_dim = env.spec().action_dim;
  demos.horizon = env.spec().horizon;
  for (int e = 0; e < n_episodes; ++e) {
    demos.episode_starts.push_back(demos.transitions.size());
    Vector s = env.reset(episode_seed(seed, e));
    for (int t = 0; t < env.spec().horizon; ++t) {
      Vector a = env.scripted_expert(s);
      StepResult r = env.step(s, a, t);
      demos.transitions.push_back(Transition{s, a, r.next_state, r.done, r.eval_reward});
      s = std::move(r.next_state);
    }
  }
  const DemoQuality q = assess_demos(env, demos, seed);
  if (!q.accepted) {
    std::ostringstream os;
    os << "expert demonstrations rejected for " << env.spec().id << ": success rate "
       << q.success_rate << " below " << kMinExpertSuccessRate;
    throw QualityError(os.str());
  }
  return demos;
}

std::string encode_demos(const DemoBuffer& d) {
  BinaryWriter w;
  w.bytes(std::string_view(kDemoMagic, 4));
  w.u32(kDemoVersion);
  w.str(d.env_id);
  w.u64(d.env_digest);
  w.u32(static_cast<std::uint32_t>(d.state_dim));
  w.u32(static_cast<std::uint32_t>(d.action_dim));
  w.u64(d.transitions.size());
  w.u32(static_cast<std::uint32_t>(d.horizon));
  w.u32(static_cast<std::uint32_t>(d.episode_starts.size()));
  for (auto s : d.episode_starts) w.u64(s);
  for (const auto& t : d.transitions) {
    w.vector(t.state);
    w.vector(t.action);
    w.vector(t.next_state);
    w.f64(t.done ? 1.0 : 0.0);
    w.f64(t.eval_reward);
  }
  return w.data();
}

DemoBuffer decode_demos(const std::string& bytes) {
  BinaryReader r(bytes);
  if (r.bytes(4) != std::string_view(kDemoMagic, 4)) throw IoError("not a demo buffer file");
  if (r.u32() != kDemoVersion) throw IoError("unsupported demo buffer version");
  DemoBuffer d;
  d.env_id = r.str();
  d.env_digest = r.u64();
  d.state_dim = static_cast<int>(r.u32());
  d.action_dim = static_cast<int>(r.u32());
  const auto n = r.u64();
  d.horizon = static_cast<int>(r.u32());
  const auto n_episodes = r.u32();
  for (std::uint32_t e = 0; e < n_episodes; ++e) d.episode_starts.push_back(r.u64());
  d.transitions.resize(n);
  for (auto& t : d.transitions) {
    t.state.resize(d.state_dim);
    t.action.resize(d.action_dim);
    t.next_state.resize(d.state_dim);
    r.vector_into(t.state);
    r.vector_into(t.action);
    r.vector_into(t.next_state);
    t.done = r.f64() != 0.0;
    t.eval_reward = r.f64();
  }
  if (!r.at_end()) throw IoError("trailing bytes after demo buffer");
  return d;
}

void save_demos(const std::string& path, const DemoBuffer& demos) {
  write_file_atomic(path, encode_demos(demos));
}

DemoBuffer load_demos(const std::string& path) { return decode_demos(read_file(path)); }

std::string demo_summary(const DemoBuffer& demos, const DemoQuality& q) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  os << "env_id: " << demos.env_id << "\n";
  os << "env_digest: " << hex64(demos.env_digest) << "\n";
  os << "episodes: " << demos.num_episodes() << "\n";
  os << "transitions: " << demos.size() << "\n";
  os << "horizon: " << demos.horizon << "\n";
  os << "success_rate: " << num(q.success_rate) << "\n";
  os << "expert_mean_return: " << num(q.expert_mean_return) << "\n";
  os << "random_mean_return: " << num(q.random_mean_return) << "\n";
  os << "competence_factor: " << num(q.competence_factor) << "\n";
  os << "quality_gate: " << (q.accepted ? "accepted" : "rejected") << "\n";
  os << "episode_returns:\n";
  const auto returns = demos.episode_returns();
  for (std::size_t i = 0; i < returns.size(); ++i) os << "  " << i << " " << num(returns[i]) << "\n";
  return os.str();
}

}  // namespace lapal::env
