#include "lapal/adversary/discriminator.hpp"

#include <sstream>

#include "lapal/common/errors.hpp"
#include "lapal/nncore/checkpoint.hpp"
#include "lapal/nncore/gaussian.hpp"

namespace lapal::adv {

namespace {

constexpr char kDiscMagic[4] = {'L', 'P', 'D', 'S'};
constexpr std::uint32_t kDiscVersion = 2;

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

std::string InputDescriptor::describe() const {
  std::ostringstream out;
  out << (space == InputSpace::kLatent ? "latent" : "raw") << "(state " << state_dim << ", action "
      << action_dim << ", codec " << hex64(codec_digest) << ")";
  return out.str();
}

Discriminator::Discriminator(InputDescriptor input, std::vector<int> hidden, Rng& rng)
    : input_(input) {
  if (input_.state_dim <= 0 || input_.action_dim <= 0) {
    throw ConfigError("discriminator input dims must be positive");
  }
  nn::MlpSpec spec;
  spec.input_dim = input_.state_dim + input_.action_dim;
  spec.hidden = std::move(hidden);
  spec.output_dim = 1;
  spec.activation = nn::Activation::kTanh;
  spec.output_activation = nn::Activation::kIdentity;
  net_ = nn::Mlp(spec, rng);
  state_shift_ = Vector::Zero(input_.state_dim);
  state_scale_ = Vector::Ones(input_.state_dim);
}

void Discriminator::set_state_normalizer(Vector shift, Vector scale) {
  if (shift.size() != input_.state_dim || scale.size() != input_.state_dim) {
    throw ConfigError("state normalizer must have state_dim entries");
  }
  if (!shift.allFinite() || !scale.allFinite() || (scale.array() <= 0.0).any()) {
    throw ConfigError("state normalizer needs finite shifts and positive scales");
  }
  state_shift_ = std::move(shift);
  state_scale_ = std::move(scale);
}

Matrix Discriminator::logits(const Matrix& states, const Matrix& u, nn::Tape* tape) const {
  if (states.rows() != input_.state_dim || u.rows() != input_.action_dim ||
      states.cols() != u.cols()) {
    std::ostringstream msg;
    msg << "discriminator expects " << input_.state_dim << "+" << input_.action_dim
        << " rows, got " << states.rows() << "x" << states.cols() << " and " << u.rows() << "x"
        << u.cols();
    throw ConfigError(msg.str());
  }
  const Matrix z = (states.colwise() - state_shift_).array().colwise() / state_scale_.array();
  return net_.forward(stack(z, u), tape);
}

double Discriminator::logit(const Vector& state, const Vector& u) const {
  return logits(state, u)(0, 0);
}

DiscLoss Discriminator::loss_and_grad(const Matrix& expert_s, const Matrix& expert_u,
                                      const Matrix& agent_s, const Matrix& agent_u,
                                      bool accumulate) {
  if (expert_s.cols() == 0 || agent_s.cols() == 0) {
    throw ConfigError("discriminator loss needs non-empty expert and agent batches");
  }
  nn::Tape te, ta;
  const Matrix le = logits(expert_s, expert_u, &te);
  const Matrix la = logits(agent_s, agent_u, &ta);
  const auto ne = static_cast<double>(le.cols());
  const auto na = static_cast<double>(la.cols());

  DiscLoss out;
  out.loss = nn::softplus(Matrix(-le)).sum() / ne + nn::softplus(la).sum() / na;
  out.expert_mean_logit = le.mean();
  out.agent_mean_logit = la.mean();
  // d softplus(-l)/dl = -sigmoid(-l) = sigmoid(l) - 1.
  const Matrix ge = (nn::sigmoid(le).array() - 1.0) / ne;
  const Matrix ga = nn::sigmoid(la) / na;
  const Matrix die = accumulate ? net_.backward(te, ge, true) : net_.input_grad(te, ge);
  const Matrix dia = accumulate ? net_.backward(ta, ga, true) : net_.input_grad(ta, ga);
  out.d_expert_u = die.bottomRows(input_.action_dim);
  out.d_agent_u = dia.bottomRows(input_.action_dim);
  return out;
}

Matrix Discriminator::reward(const Matrix& states, const Matrix& u) const {
  return nn::softplus(logits(states, u));
}

std::uint64_t Discriminator::digest() const {
  BinaryWriter w;
  w.u32(input_.space == InputSpace::kLatent ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(input_.state_dim));
  w.u32(static_cast<std::uint32_t>(input_.action_dim));
  w.u64(input_.codec_digest);
  w.vector(state_shift_);
  w.vector(state_scale_);
  w.u64(net_.spec().digest());
  w.u64(net_.params().digest());
  return fnv1a(w.data());
}

void Discriminator::write(BinaryWriter& out) const {
  out.bytes(std::string_view(kDiscMagic, 4));
  out.u32(kDiscVersion);
  out.u32(input_.space == InputSpace::kLatent ? 1 : 0);
  out.u32(static_cast<std::uint32_t>(input_.state_dim));
  out.u32(static_cast<std::uint32_t>(input_.action_dim));
  out.u64(input_.codec_digest);
  const auto& hidden = net_.spec().hidden;
  out.u32(static_cast<std::uint32_t>(hidden.size()));
  for (int h : hidden) out.u32(static_cast<std::uint32_t>(h));
  out.vector(state_shift_);
  out.vector(state_scale_);
  nn::write_segment(out, net_);
}

Discriminator Discriminator::read(BinaryReader& in, const InputDescriptor& expected) {
  if (in.bytes(4) != std::string_view(kDiscMagic, 4)) throw IoError("not a discriminator checkpoint");
  const std::uint32_t version = in.u32();
  if (version != kDiscVersion) {
    throw IoError("unsupported discriminator checkpoint version " + std::to_string(version));
  }
  InputDescriptor stored;
  stored.space = in.u32() != 0 ? InputSpace::kLatent : InputSpace::kRaw;
  stored.state_dim = static_cast<int>(in.u32());
  stored.action_dim = static_cast<int>(in.u32());
  stored.codec_digest = in.u64();
  if (!(stored == expected)) {
    throw IoError("discriminator was trained against " + stored.describe() + ", expected " +
                  expected.describe());
  }
  const std::uint32_t n_hidden = in.u32();
  if (n_hidden == 0 || n_hidden > 64) throw IoError("discriminator checkpoint has a bad layer count");
  std::vector<int> hidden(n_hidden);
  for (auto& h : hidden) h = static_cast<int>(in.u32());
  Rng rng(0);
  Discriminator d(stored, hidden, rng);
  Vector shift(stored.state_dim), scale(stored.state_dim);
  in.vector_into(shift);
  in.vector_into(scale);
  try {
    d.set_state_normalizer(std::move(shift), std::move(scale));
  } catch (const ConfigError& e) {
    throw IoError(std::string("discriminator checkpoint: ") + e.what());
  }
  nn::read_segment(in, d.net_);
  return d;
}

}  // namespace lapal::adv
