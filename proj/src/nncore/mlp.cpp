#include "lapal/nncore/mlp.hpp"

#include <cmath>
#include <sstream>

#include "lapal/common/binary_io.hpp"
#include "lapal/common/errors.hpp"

namespace lapal::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kIdentity:
      return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "leaky_relu") return Activation::kLeakyRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) throw ConfigError("mlp dims must be positive");
  if (hidden.empty()) throw ConfigError("mlp hidden list must be non-empty");
  for (int h : hidden) {
    if (h <= 0) throw ConfigError("mlp hidden sizes must be positive");
  }
  if (output_activation != Activation::kIdentity && output_activation != Activation::kTanh) {
    throw ConfigError("mlp output activation must be identity or tanh");
  }
}

std::string MlpSpec::describe() const {
  std::ostringstream os;
  os << "in=" << input_dim << ";hidden=";
  for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
  os << ";out=" << output_dim << ";act=" << to_string(activation)
     << ";out_act=" << to_string(output_activation);
  return os.str();
}

std::uint64_t MlpSpec::digest() const { return fnv1a(describe()); }

namespace {

constexpr double kTanhMax = 1.0 - 0x1p-53;

std::vector<std::pair<int, int>> layer_shapes(const MlpSpec& spec) {
  std::vector<std::pair<int, int>> shapes;  // (out, in)
  int in = spec.input_dim;
  for (int h : spec.hidden) {
    shapes.emplace_back(h, in);
    in = h;
  }
  shapes.emplace_back(spec.output_dim, in);
  return shapes;
}

void apply_activation(Activation a, const Matrix& pre, Matrix& post) {
  switch (a) {
    case Activation::kRelu:
      post = pre.cwiseMax(0.0);
      break;
    case Activation::kLeakyRelu:
      post = pre.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
      break;
    case Activation::kTanh:
      // tanh rounds to +-1 for |x| > ~19; keep outputs strictly inside.
      post = pre.array().tanh().matrix().cwiseMin(kTanhMax).cwiseMax(-kTanhMax);
      break;
    case Activation::kIdentity:
      post = pre;
      break;
  }
}

// upstream (dL/dpost) -> dL/dpre, in place.
void activation_backward(Activation a, const Matrix& pre, const Matrix& post, Matrix& grad) {
  switch (a) {
    case Activation::kRelu:
      grad = (pre.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::kLeakyRelu:
      grad = (pre.array() > 0.0).select(grad, kLeakySlope * grad);
      break;
    case Activation::kTanh:
      grad.array() *= (1.0 - post.array().square());
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

ParamTree ParamTree::zeros_like(const MlpSpec& spec) {
  spec.validate();
  ParamTree tree;
  for (auto [out, in] : layer_shapes(spec)) {
    DenseLayer zero{Matrix::Zero(out, in), Vector::Zero(out)};
    tree.layers.push_back(zero);
    tree.grads.push_back(zero);
    tree.adam_m.push_back(zero);
    tree.adam_v.push_back(zero);
  }
  return tree;
}

std::size_t ParamTree::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  return n;
}

void ParamTree::zero_grad() {
  for (auto& g : grads) {
    g.weights.setZero();
    g.biases.setZero();
  }
}

bool ParamTree::grads_finite() const {
  for (const auto& g : grads) {
    if (!g.weights.allFinite() || !g.biases.allFinite()) return false;
  }
  return true;
}

namespace {

Vector flatten(const std::vector<DenseLayer>& ls, std::size_t n) {
  Vector flat(static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (const auto& l : ls) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat(k++) = l.weights(r, c);
    }
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) flat(k++) = l.biases(i);
  }
  return flat;
}

}  // namespace

Vector ParamTree::flat_params() const { return flatten(layers, num_params()); }
Vector ParamTree::flat_grads() const { return flatten(grads, num_params()); }

void ParamTree::set_flat_params(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != num_params()) {
    throw ConfigError("flat parameter vector has wrong length");
  }
  Eigen::Index k = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat(k++);
    }
    for (Eigen::Index i = 0; i < l.biases.size(); ++i) l.biases(i) = flat(k++);
  }
}

std::uint64_t ParamTree::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& l : layers) {
    h = digest_matrix(l.weights, h);
    h = digest_vector(l.biases, h);
  }
  return h;
}

Matrix mlp_forward(const ParamTree& params, const MlpSpec& spec, const Matrix& x, Tape* tape) {
  const int n_layers = spec.num_layers();
  if (static_cast<int>(params.layers.size()) != n_layers) {
    throw ConfigError("parameter tree does not match spec " + spec.describe());
  }
  if (x.rows() != spec.input_dim) {
    throw ConfigError("mlp input has " + std::to_string(x.rows()) + " rows, expected " +
                      std::to_string(spec.input_dim));
  }
  if (tape != nullptr) {
    tape->input = x;
    tape->pre.resize(n_layers);
    tape->post.resize(n_layers);
  }
  Matrix h = x;
  for (int l = 0; l < n_layers; ++l) {
    const DenseLayer& layer = params.layers[l];
    if (layer.weights.cols() != h.rows()) throw ConfigError("mlp layer shape mismatch");
    Matrix pre = layer.weights * h;
    pre.colwise() += layer.biases;
    const Activation act = (l + 1 == n_layers) ? spec.output_activation : spec.activation;
    Matrix post;
    apply_activation(act, pre, post);
    if (tape != nullptr) {
      tape->pre[l] = std::move(pre);
      tape->post[l] = post;
    }
    h = std::move(post);
  }
  return h;
}

Matrix mlp_backward(ParamTree& params, const MlpSpec& spec, const Tape& tape,
                    const Matrix& upstream, bool accumulate) {
  if (tape.empty()) throw StateError("mlp backward called without a recorded forward pass");
  const int n_layers = spec.num_layers();
  if (static_cast<int>(tape.pre.size()) != n_layers) {
    throw StateError("tape was recorded for a different network");
  }
  if (upstream.rows() != spec.output_dim || upstream.cols() != tape.input.cols()) {
    throw ConfigError("upstream gradient shape mismatch");
  }
  Matrix grad = upstream;
  for (int l = n_layers - 1; l >= 0; --l) {
    const Activation act = (l + 1 == n_layers) ? spec.output_activation : spec.activation;
    activation_backward(act, tape.pre[l], tape.post[l], grad);
    const Matrix& below = (l == 0) ? tape.input : tape.post[l - 1];
    if (accumulate) {
      params.grads[l].weights.noalias() += grad * below.transpose();
      params.grads[l].biases += grad.rowwise().sum();
    }
    grad = params.layers[l].weights.transpose() * grad;
  }
  return grad;
}

Matrix mlp_input_grad(const ParamTree& params, const MlpSpec& spec, const Tape& tape,
                      const Matrix& upstream) {
  // With accumulate=false mlp_backward only reads params.
  return mlp_backward(const_cast<ParamTree&>(params), spec, tape, upstream, false);
}

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  params_ = ParamTree::zeros_like(spec_);
  for (auto& layer : params_.layers) {
    const double fan_in = static_cast<double>(layer.weights.cols());
    const double fan_out = static_cast<double>(layer.weights.rows());
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    layer.weights = uniform_matrix(layer.weights.rows(), layer.weights.cols(), -bound, bound, rng);
  }
}

Vector Mlp::forward_one(const Vector& x) const {
  Matrix out = forward(Matrix(x));
  return out.col(0);
}

}  // namespace lapal::nn
