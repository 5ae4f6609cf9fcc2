#include "lapal/latentact/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lapal/common/errors.hpp"
#include "lapal/common/log.hpp"
#include "lapal/nncore/checkpoint.hpp"

namespace lapal::latent {

namespace {

constexpr char kCodecMagic[4] = {'L', 'P', 'C', 'V'};
constexpr std::uint32_t kCodecVersion = 1;

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

Matrix gather_cols(const Matrix& m, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t k = begin; k < end; ++k) {
    out.col(static_cast<Eigen::Index>(k - begin)) = m.col(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

void write_config(BinaryWriter& out, const CvaeConfig& c) {
  out.u32(static_cast<std::uint32_t>(c.latent_dim));
  out.f64(c.beta);
  out.u32(static_cast<std::uint32_t>(c.hidden.size()));
  for (int h : c.hidden) out.u32(static_cast<std::uint32_t>(h));
  out.str(nn::to_string(c.activation));
  out.u32(static_cast<std::uint32_t>(c.epochs));
  out.u32(static_cast<std::uint32_t>(c.batch_size));
  out.f64(c.lr);
  out.f64(c.latent_bound);
  out.u32(c.sample_expert_latents ? 1 : 0);
}

CvaeConfig read_config(BinaryReader& in) {
  CvaeConfig c;
  c.latent_dim = static_cast<int>(in.u32());
  c.beta = in.f64();
  const std::uint32_t n_hidden = in.u32();
  if (n_hidden > 64) throw IoError("codec header lists " + std::to_string(n_hidden) + " hidden layers");
  c.hidden.resize(n_hidden);
  for (auto& h : c.hidden) h = static_cast<int>(in.u32());
  try {
    c.activation = nn::activation_from_string(in.str());
  } catch (const ConfigError& e) {
    throw IoError(std::string("codec header: ") + e.what());
  }
  c.epochs = static_cast<int>(in.u32());
  c.batch_size = static_cast<int>(in.u32());
  c.lr = in.f64();
  c.latent_bound = in.f64();
  c.sample_expert_latents = in.u32() != 0;
  return c;
}

}  // namespace

void CvaeConfig::validate() const {
  if (latent_dim <= 0) throw ConfigError("latent_dim must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
  if (hidden.empty()) throw ConfigError("codec needs at least one hidden layer");
  for (int h : hidden) {
    if (h <= 0) throw ConfigError("codec hidden sizes must be positive");
  }
  if (epochs < 0) throw ConfigError("codec epochs must be >= 0");
  if (batch_size <= 0) throw ConfigError("codec batch_size must be positive");
  if (!(lr >= 0.0)) throw ConfigError("codec lr must be >= 0");
  if (!(latent_bound > 0.0) || !std::isfinite(latent_bound)) {
    throw ConfigError("latent_bound must be finite and positive");
  }
}

ActionCodec::ActionCodec(int state_dim, Vector action_low, Vector action_high, CvaeConfig config,
                         Rng& rng)
    : state_dim_(state_dim),
      action_low_(std::move(action_low)),
      action_high_(std::move(action_high)),
      config_(std::move(config)) {
  config_.validate();
  if (state_dim_ <= 0) throw ConfigError("codec state_dim must be positive");
  if (action_low_.size() == 0 || action_low_.size() != action_high_.size() ||
      (action_high_.array() <= action_low_.array()).any()) {
    throw ConfigError("codec needs a non-empty action box with low < high");
  }
  action_mid_ = 0.5 * (action_high_ + action_low_);
  action_half_ = 0.5 * (action_high_ - action_low_);
  if (config_.latent_dim >= action_dim()) {
    log_warn("latent_dim " + std::to_string(config_.latent_dim) + " >= action_dim " +
             std::to_string(action_dim()) + "; the latent space does not compress actions");
  }
  nn::MlpSpec enc;
  enc.input_dim = state_dim_ + action_dim();
  enc.hidden = config_.hidden;
  enc.output_dim = 2 * config_.latent_dim;
  enc.activation = config_.activation;
  enc.output_activation = nn::Activation::kIdentity;
  nn::MlpSpec dec;
  dec.input_dim = state_dim_ + config_.latent_dim;
  dec.hidden = config_.hidden;
  dec.output_dim = action_dim();
  dec.activation = config_.activation;
  dec.output_activation = nn::Activation::kTanh;
  encoder_ = nn::Mlp(enc, rng);
  decoder_ = nn::Mlp(dec, rng);
}

void ActionCodec::check_inputs(const Matrix& states, const Matrix& other, int other_rows,
                               const char* what) const {
  if (states.rows() != state_dim_ || other.rows() != other_rows || states.cols() != other.cols() ||
      states.cols() == 0) {
    std::ostringstream msg;
    msg << "codec " << what << ": expected states " << state_dim_ << "xN and " << other_rows
        << "xN, got " << states.rows() << "x" << states.cols() << " and " << other.rows() << "x"
        << other.cols();
    throw ConfigError(msg.str());
  }
  if (!states.allFinite() || !other.allFinite()) {
    throw NumericError(std::string("codec ") + what + ": non-finite input");
  }
}

BatchGaussian ActionCodec::encode(const Matrix& states, const Matrix& actions,
                                  EncodeTape* tape) const {
  check_inputs(states, actions, action_dim(), "encode");
  const int L = config_.latent_dim;
  const Matrix raw = encoder_.forward(stack(states, actions), tape ? &tape->net : nullptr);
  BatchGaussian out;
  out.mean = config_.latent_bound * raw.topRows(L).array().tanh();
  out.log_std = raw.bottomRows(L).cwiseMax(nn::kLogStdMin).cwiseMin(nn::kLogStdMax);
  if (tape) {
    tape->raw_mean = raw.topRows(L);
    tape->raw_log_std = raw.bottomRows(L);
  }
  return out;
}

nn::GaussianDist ActionCodec::encode_one(const Vector& state, const Vector& action) const {
  BatchGaussian g = encode(state, action);
  return nn::make_gaussian(g.mean.col(0), g.log_std.col(0));
}

Matrix ActionCodec::encode_mean(const Matrix& states, const Matrix& actions) const {
  return encode(states, actions).mean;
}

Matrix ActionCodec::expert_latents(const Matrix& states, const Matrix& actions, Rng& rng) const {
  BatchGaussian g = encode(states, actions);
  if (!config_.sample_expert_latents) return g.mean;
  const Matrix noise = standard_normal(g.mean.rows(), g.mean.cols(), rng);
  return g.mean + (g.log_std.array().exp() * noise.array()).matrix();
}

Matrix ActionCodec::decode(const Matrix& states, const Matrix& latents, nn::Tape* tape) const {
  check_inputs(states, latents, config_.latent_dim, "decode");
  const Matrix y = decoder_.forward(stack(states, latents), tape);
  return (y.array().colwise() * action_half_.array()).colwise() + action_mid_.array();
}

Vector ActionCodec::decode_one(const Vector& state, const Vector& latent) const {
  return decode(state, latent).col(0);
}

Matrix ActionCodec::encode_mean_backward(const EncodeTape& tape, const Matrix& d_mean,
                                         bool accumulate) {
  const int L = config_.latent_dim;
  if (d_mean.rows() != L || d_mean.cols() != tape.raw_mean.cols()) {
    throw ConfigError("encode_mean_backward: gradient shape does not match the tape");
  }
  Matrix d_raw = Matrix::Zero(2 * L, d_mean.cols());
  const Matrix t = tape.raw_mean.array().tanh();
  d_raw.topRows(L) = config_.latent_bound * d_mean.array() * (1.0 - t.array().square());
  if (accumulate && !frozen_) return encoder_.backward(tape.net, d_raw, true);
  return encoder_.input_grad(tape.net, d_raw);
}

Matrix ActionCodec::decode_backward(const nn::Tape& tape, const Matrix& d_action, bool accumulate) {
  const Matrix dy = d_action.array().colwise() * action_half_.array();
  if (accumulate && !frozen_) return decoder_.backward(tape, dy, true);
  return decoder_.input_grad(tape, dy);
}

CvaeLoss ActionCodec::loss(const Matrix& states, const Matrix& actions, const Matrix& noise,
                           bool grad, double grad_scale) {
  if (grad && frozen_) throw StateError("cannot compute codec gradients while the codec is frozen");
  const int L = config_.latent_dim;
  const auto batch = static_cast<double>(states.cols());
  if (noise.rows() != L || noise.cols() != states.cols()) {
    throw ConfigError("codec loss: noise must be latent_dim x batch");
  }
  EncodeTape etape;
  const BatchGaussian post = encode(states, actions, &etape);
  const Matrix sigma = post.log_std.array().exp();
  const Matrix z = post.mean + (sigma.array() * noise.array()).matrix();
  nn::Tape dtape;
  const Matrix a_hat = decode(states, z, &dtape);
  const Matrix diff = a_hat - actions;

  CvaeLoss out;
  out.recon = diff.colwise().squaredNorm().sum() / batch;
  out.kl = nn::gaussian_kl_to_standard_cols(post.mean, post.log_std).sum() / batch;
  out.loss = out.recon + config_.beta * out.kl;
  if (!grad) return out;

  const double kl_scale = grad_scale * config_.beta / batch;
  const Matrix d_in = decode_backward(dtape, (2.0 * grad_scale / batch) * diff, true);
  const Matrix dz = d_in.bottomRows(L);
  const Matrix d_mean = dz + kl_scale * post.mean;
  Matrix d_log_std = dz.array() * noise.array() * sigma.array() +
                     kl_scale * (sigma.array().square() - 1.0);
  // Clamped log-std entries pass no gradient.
  d_log_std = (etape.raw_log_std.array() < nn::kLogStdMin ||
               etape.raw_log_std.array() > nn::kLogStdMax)
                  .select(0.0, d_log_std);
  Matrix d_raw(2 * L, states.cols());
  const Matrix t = etape.raw_mean.array().tanh();
  d_raw.topRows(L) = config_.latent_bound * d_mean.array() * (1.0 - t.array().square());
  d_raw.bottomRows(L) = d_log_std;
  encoder_.backward(etape.net, d_raw, true);
  return out;
}

void ActionCodec::step_encoder(const nn::AdamConfig& cfg) {
  if (frozen_) throw StateError("encoder is frozen");
  nn::adam_step(encoder_.params(), cfg);
}

void ActionCodec::step_decoder(const nn::AdamConfig& cfg) {
  if (frozen_) throw StateError("decoder is frozen");
  nn::adam_step(decoder_.params(), cfg);
}

void ActionCodec::zero_grad() {
  encoder_.params().zero_grad();
  decoder_.params().zero_grad();
}

std::uint64_t ActionCodec::digest() const {
  BinaryWriter w;
  w.u32(static_cast<std::uint32_t>(state_dim_));
  w.vector(action_low_);
  w.vector(action_high_);
  write_config(w, config_);
  w.u64(encoder_.params().digest());
  w.u64(decoder_.params().digest());
  return fnv1a(w.data());
}

void ActionCodec::write(BinaryWriter& out) const {
  out.bytes(std::string_view(kCodecMagic, 4));
  out.u32(kCodecVersion);
  out.u32(static_cast<std::uint32_t>(state_dim_));
  out.u32(static_cast<std::uint32_t>(action_dim()));
  out.vector(action_low_);
  out.vector(action_high_);
  write_config(out, config_);
  out.u32(frozen_ ? 1 : 0);
  nn::write_segment(out, encoder_);
  nn::write_segment(out, decoder_);
}

ActionCodec ActionCodec::read(BinaryReader& in, int state_dim, const Vector& action_low,
                              const Vector& action_high) {
  if (in.bytes(4) != std::string_view(kCodecMagic, 4)) throw IoError("not a codec checkpoint");
  const std::uint32_t version = in.u32();
  if (version != kCodecVersion) {
    throw IoError("unsupported codec checkpoint version " + std::to_string(version));
  }
  const int sd = static_cast<int>(in.u32());
  const int ad = static_cast<int>(in.u32());
  if (sd != state_dim || ad != action_low.size()) {
    throw IoError("codec checkpoint is for state/action dims " + std::to_string(sd) + "/" +
                  std::to_string(ad) + ", environment has " + std::to_string(state_dim) + "/" +
                  std::to_string(action_low.size()));
  }
  Vector low(ad), high(ad);
  in.vector_into(low);
  in.vector_into(high);
  if (low != action_low || high != action_high) {
    throw IoError("codec checkpoint action bounds differ from the environment");
  }
  CvaeConfig config = read_config(in);
  const bool frozen = in.u32() != 0;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("codec checkpoint config: ") + e.what());
  }
  Rng rng(0);
  const LogLevel saved = log_threshold().load();
  set_log_level(LogLevel::kError);
  ActionCodec codec(sd, low, high, config, rng);
  set_log_level(saved);
  nn::read_segment(in, codec.encoder_);
  nn::read_segment(in, codec.decoder_);
  codec.frozen_ = frozen;
  return codec;
}

CodecTrainRecord evaluate_codec(const ActionCodec& codec, const Matrix& states,
                                const Matrix& actions) {
  CodecTrainRecord r;
  const BatchGaussian post = codec.encode(states, actions);
  const Matrix recon = codec.decode(states, post.mean);
  const auto n = static_cast<double>(states.cols());
  r.heldout_recon_mse = (recon - actions).colwise().squaredNorm().sum() / n;
  r.heldout_kl = nn::gaussian_kl_to_standard_cols(post.mean, post.log_std).sum() / n;
  const Vector mean_action = actions.rowwise().mean();
  r.baseline_mse = (actions.colwise() - mean_action).colwise().squaredNorm().sum() / n;
  r.mean_action_sq_norm = actions.colwise().squaredNorm().sum() / n;
  r.heldout_size = static_cast<std::size_t>(states.cols());
  return r;
}

namespace {

std::vector<std::size_t> shuffled_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(seed, 1));
  std::shuffle(order.begin(), order.end(), split_rng);
  return order;
}

}  // namespace

std::vector<std::size_t> heldout_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order = shuffled_split(n, seed);
  order.resize(std::max<std::size_t>(1, n / 10));
  return order;
}

TrainedCodec train_codec(const env::DemoBuffer& demos, const Vector& action_low,
                         const Vector& action_high, const CvaeConfig& config, std::uint64_t seed) {
  demos.validate();
  config.validate();
  const std::size_t n = demos.size();
  if (n < 2) throw ConfigError("codec training needs at least two transitions");
  const Matrix states = demos.states();
  const Matrix actions = demos.actions();

  Rng init_rng(derive_seed(seed, 0));
  TrainedCodec out{ActionCodec(demos.state_dim, action_low, action_high, config, init_rng), {}};
  ActionCodec& codec = out.codec;

  const std::vector<std::size_t> order = shuffled_split(n, seed);
  const std::size_t n_held = std::max<std::size_t>(1, n / 10);
  const std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<long>(n_held));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(n_held), order.end());
  const Matrix held_s = gather_cols(states, held, 0, held.size());
  const Matrix held_a = gather_cols(actions, held, 0, held.size());

  const nn::AdamConfig adam{config.lr};
  Rng batch_rng(derive_seed(seed, 2));
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), batch_rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < train.size(); begin += bs) {
      const std::size_t end = std::min(train.size(), begin + bs);
      const Matrix s = gather_cols(states, train, begin, end);
      const Matrix a = gather_cols(actions, train, begin, end);
      const Matrix noise = standard_normal(config.latent_dim, s.cols(), batch_rng);
      const CvaeLoss l = codec.loss(s, a, noise, true);
      if (!std::isfinite(l.loss)) {
        std::ostringstream msg;
        msg << "codec loss became non-finite at epoch " << epoch << ", batch " << batches
            << " (recon " << l.recon << ", kl " << l.kl << ")";
        throw NumericError(msg.str());
      }
      codec.step_encoder(adam);
      codec.step_decoder(adam);
      total += l.loss;
      ++batches;
    }
    out.record.epoch_loss.push_back(total / static_cast<double>(batches));
    out.record.heldout_recon.push_back(evaluate_codec(codec, held_s, held_a).heldout_recon_mse);
  }

  const CodecTrainRecord final_eval = evaluate_codec(codec, held_s, held_a);
  out.record.heldout_recon_mse = final_eval.heldout_recon_mse;
  out.record.heldout_kl = final_eval.heldout_kl;
  out.record.baseline_mse = final_eval.baseline_mse;
  out.record.mean_action_sq_norm = final_eval.mean_action_sq_norm;
  out.record.train_size = train.size();
  out.record.heldout_size = held.size();
  if (config.epochs > 0 && !(out.record.heldout_recon_mse < out.record.baseline_mse)) {
    std::ostringstream msg;
    msg << "codec rejected: held-out reconstruction MSE " << out.record.heldout_recon_mse
        << " is not below the mean-action baseline " << out.record.baseline_mse;
    throw QualityError(msg.str());
  }
  return out;
}

void save_codec(const std::string& path, const ActionCodec& codec) {
  BinaryWriter w;
  codec.write(w);
  write_file_atomic(path, w.data());
}

ActionCodec load_codec(const std::string& path, int state_dim, const Vector& action_low,
                       const Vector& action_high) {
  const std::string bytes = read_file(path);
  BinaryReader in(bytes);
  ActionCodec codec = ActionCodec::read(in, state_dim, action_low, action_high);
  if (!in.at_end()) throw IoError("trailing bytes after codec checkpoint in " + path);
  return codec;
}

}  // namespace lapal::latent
