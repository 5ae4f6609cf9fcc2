#include "lapal/cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "lapal/common/binary_io.hpp"
#include "lapal/common/errors.hpp"

namespace lapal::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::string fmt_float(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
T parse_integer(const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + v + "' is not a valid integer");
  return out;
}

double parse_float(const std::string& v) {
  if (v == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (v == "inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + v + "' is not a valid number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("'" + v + "' is not a bool (true/false)");
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string& v) {
  std::vector<T> out;
  for (const auto& item : split(v, ',')) out.push_back(parse_integer<T>(item));
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::string type;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename Access>
Field int_field(std::string sec, std::string key, Access access) {
  return {sec, key, "int",
          [access](const TrainConfig& c) { return std::to_string(access(c)); },
          [access](TrainConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            access(c) = parse_integer<T>(v);
          }};
}

template <typename Access>
Field u64_field(std::string sec, std::string key, Access access) {
  Field f = int_field(std::move(sec), std::move(key), access);
  f.type = "u64";
  return f;
}

template <typename Access>
Field float_field(std::string sec, std::string key, Access access) {
  return {sec, key, "float",
          [access](const TrainConfig& c) { return fmt_float(access(c)); },
          [access](TrainConfig& c, const std::string& v) { access(c) = parse_float(v); }};
}

template <typename Access>
Field bool_field(std::string sec, std::string key, Access access) {
  return {sec, key, "bool",
          [access](const TrainConfig& c) {
            return std::string(access(c) ? "true" : "false");
          },
          [access](TrainConfig& c, const std::string& v) { access(c) = parse_bool(v); }};
}

template <typename Access>
Field string_field(std::string sec, std::string key, Access access) {
  return {sec, key, "string",
          [access](const TrainConfig& c) { return std::string(access(c)); },
          [access](TrainConfig& c, const std::string& v) { access(c) = v; }};
}

template <typename Access>
Field ints_field(std::string sec, std::string key, Access access) {
  return {sec, key, "ints",
          [access](const TrainConfig& c) { return join(access(c)); },
          [access](TrainConfig& c, const std::string& v) { access(c) = parse_list<int>(v); }};
}

template <typename Access>
Field activation_field(std::string sec, std::string key, Access access) {
  return {sec, key, "string",
          [access](const TrainConfig& c) { return nn::to_string(access(c)); },
          [access](TrainConfig& c, const std::string& v) { access(c) = nn::activation_from_string(v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(string_field("general", "preset", [](auto& c) -> auto& { return c.preset; }));
    f.push_back({"general", "seeds", "u64s",
                 [](const TrainConfig& c) { return join(c.seeds); },
                 [](TrainConfig& c, const std::string& v) { c.seeds = parse_list<std::uint64_t>(v); }});

    f.push_back({"run", "algo", "string",
                 [](const TrainConfig& c) { return orch::to_string(c.run.algo); },
                 [](TrainConfig& c, const std::string& v) { c.run.algo = orch::algo_from_string(v); }});
    f.push_back(string_field("run", "env", [](auto& c) -> auto& { return c.run.env_id; }));
    f.push_back(int_field("run", "total_env_steps", [](auto& c) -> auto& { return c.run.total_env_steps; }));
    f.push_back(int_field("run", "steps_per_iteration", [](auto& c) -> auto& { return c.run.steps_per_iteration; }));
    f.push_back(int_field("run", "disc_updates_per_iteration", [](auto& c) -> auto& { return c.run.disc_updates_per_iteration; }));
    f.push_back(int_field("run", "gen_updates_per_iteration", [](auto& c) -> auto& { return c.run.gen_updates_per_iteration; }));
    f.push_back(int_field("run", "eval_every", [](auto& c) -> auto& { return c.run.eval_every; }));
    f.push_back(int_field("run", "eval_episodes", [](auto& c) -> auto& { return c.run.eval_episodes; }));
    f.push_back(u64_field("run", "eval_seed", [](auto& c) -> auto& { return c.run.eval_seed; }));
    f.push_back(int_field("run", "batch_size", [](auto& c) -> auto& { return c.run.batch_size; }));
    f.push_back(ints_field("run", "disc_hidden", [](auto& c) -> auto& { return c.run.disc_hidden; }));
    f.push_back(float_field("run", "disc_lr", [](auto& c) -> auto& { return c.run.disc_lr; }));
    f.push_back(bool_field("run", "normalize_disc_states", [](auto& c) -> auto& { return c.run.normalize_disc_states; }));
    f.push_back(u64_field("run", "replay_capacity", [](auto& c) -> auto& { return c.run.replay_capacity; }));
    f.push_back(int_field("run", "warmup_steps", [](auto& c) -> auto& { return c.run.warmup_steps; }));
    f.push_back(float_field("run", "encoder_lr", [](auto& c) -> auto& { return c.run.encoder_lr; }));
    f.push_back(float_field("run", "decoder_lr", [](auto& c) -> auto& { return c.run.decoder_lr; }));
    f.push_back(bool_field("run", "skip_codec_pretraining", [](auto& c) -> auto& { return c.run.skip_codec_pretraining; }));
    f.push_back(bool_field("run", "reuse_emitted_latents", [](auto& c) -> auto& { return c.run.reuse_emitted_latents; }));
    f.push_back(float_field("run", "aux_recon_weight", [](auto& c) -> auto& { return c.run.aux_recon_weight; }));
    f.push_back(bool_field("run", "divergence_guard", [](auto& c) -> auto& { return c.run.divergence_guard; }));

    f.push_back(ints_field("sac", "actor_hidden", [](auto& c) -> auto& { return c.run.sac.actor_hidden; }));
    f.push_back(ints_field("sac", "critic_hidden", [](auto& c) -> auto& { return c.run.sac.critic_hidden; }));
    f.push_back(activation_field("sac", "activation", [](auto& c) -> auto& { return c.run.sac.activation; }));
    f.push_back(float_field("sac", "gamma", [](auto& c) -> auto& { return c.run.sac.gamma; }));
    f.push_back(float_field("sac", "tau", [](auto& c) -> auto& { return c.run.sac.tau; }));
    f.push_back(float_field("sac", "actor_lr", [](auto& c) -> auto& { return c.run.sac.actor_lr; }));
    f.push_back(float_field("sac", "critic_lr", [](auto& c) -> auto& { return c.run.sac.critic_lr; }));
    f.push_back(float_field("sac", "alpha_lr", [](auto& c) -> auto& { return c.run.sac.alpha_lr; }));
    f.push_back(float_field("sac", "init_log_alpha", [](auto& c) -> auto& { return c.run.sac.init_log_alpha; }));
    f.push_back(bool_field("sac", "auto_alpha", [](auto& c) -> auto& { return c.run.sac.auto_alpha; }));
    f.push_back(float_field("sac", "target_entropy", [](auto& c) -> auto& { return c.run.sac.target_entropy; }));

    f.push_back(int_field("cvae", "latent_dim", [](auto& c) -> auto& { return c.run.cvae.latent_dim; }));
    f.push_back(float_field("cvae", "beta", [](auto& c) -> auto& { return c.run.cvae.beta; }));
    f.push_back(ints_field("cvae", "hidden", [](auto& c) -> auto& { return c.run.cvae.hidden; }));
    f.push_back(activation_field("cvae", "activation", [](auto& c) -> auto& { return c.run.cvae.activation; }));
    f.push_back(int_field("cvae", "epochs", [](auto& c) -> auto& { return c.run.cvae.epochs; }));
    f.push_back(int_field("cvae", "batch_size", [](auto& c) -> auto& { return c.run.cvae.batch_size; }));
    f.push_back(float_field("cvae", "lr", [](auto& c) -> auto& { return c.run.cvae.lr; }));
    f.push_back(float_field("cvae", "latent_bound", [](auto& c) -> auto& { return c.run.cvae.latent_bound; }));
    f.push_back(bool_field("cvae", "sample_expert_latents", [](auto& c) -> auto& { return c.run.cvae.sample_expert_latents; }));

    f.push_back(int_field("demos", "episodes", [](auto& c) -> auto& { return c.demo_episodes; }));
    f.push_back(u64_field("demos", "seed", [](auto& c) -> auto& { return c.demo_seed; }));
    return f;
  }();
  return all;
}

const Field& find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return f;
  }
  throw ConfigError("unknown config key " + section + "." + key);
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"desk", "paper"};
  return names;
}

TrainConfig preset_config(const std::string& name) {
  TrainConfig c;
  c.preset = name;
  if (name == "desk") return c;
  if (name == "paper") {
    c.run.cvae.hidden = {256, 256};
    c.run.disc_hidden = {256, 256};
    c.run.sac.actor_hidden = {256, 256, 256};
    c.run.sac.critic_hidden = {256, 256};
    c.run.total_env_steps = 1000000;
    c.run.eval_every = 10000;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (desk, paper)");
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.type + " " + f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

TrainConfig parse_config(const std::string& text, const TrainConfig& base) {
  TrainConfig c = base;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      bool known = false;
      for (const auto& f : fields()) known = known || f.section == section;
      if (!known) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) throw ConfigError(where + "key outside of a section");
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected '<type> <key> = <value>'");
    const std::string lhs = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto sp = lhs.find_first_of(" \t");
    if (sp == std::string::npos) throw ConfigError(where + "missing type before the key");
    const std::string type = lhs.substr(0, sp);
    const std::string key = trim(lhs.substr(sp));
    try {
      const Field& f = find_field(section, key);
      if (f.type != type) {
        throw ConfigError(section + "." + key + " has type " + f.type + ", not " + type);
      }
      f.set(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return c;
}

TrainConfig load_config(const std::string& path, const TrainConfig& base) {
  return parse_config(read_file(path), base);
}

void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  const Field& f = find_field(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)));
  f.set(config, trim(assignment.substr(eq + 1)));
}

TrainConfig resolve_config(const std::string& preset, const std::string& file,
                           const std::vector<std::string>& overrides) {
  TrainConfig config = preset_config(preset.empty() ? "desk" : preset);
  if (!file.empty()) {
    const std::string text = read_file(file);
    if (preset.empty()) {
      const TrainConfig probe = parse_config(text, config);
      config = preset_config(probe.preset);
    }
    config = parse_config(text, config);
    if (!preset.empty()) config.preset = preset;
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.section + "." + f.key);
  return out;
}

bool configs_equal(const TrainConfig& a, const TrainConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace lapal::cli
