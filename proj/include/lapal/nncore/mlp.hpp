#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "lapal/common/rng.hpp"

namespace lapal::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kRelu, kLeakyRelu, kTanh, kIdentity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

inline constexpr double kLeakySlope = 0.01;

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden{64, 64};
  int output_dim = 1;
  Activation activation = Activation::kRelu;
  Activation output_activation = Activation::kIdentity;

  // Throws ConfigError on non-positive sizes, empty hidden list, or an
  // output activation other than identity/tanh.
  void validate() const;
  std::string describe() const;
  std::uint64_t digest() const;
  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }

  bool operator==(const MlpSpec&) const = default;
};

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
};

// Trainable parameters of one network with paired gradient and Adam storage.
// Every vector below has one entry per layer and identical shapes.
struct ParamTree {
  std::vector<DenseLayer> layers;
  std::vector<DenseLayer> grads;
  std::vector<DenseLayer> adam_m;
  std::vector<DenseLayer> adam_v;
  std::int64_t adam_step = 0;

  static ParamTree zeros_like(const MlpSpec& spec);

  std::size_t num_params() const;
  void zero_grad();
  bool grads_finite() const;

  // Flattened views in layer order, weights (row-major) then biases. Used by
  // finite-difference checks and digests.
  Vector flat_params() const;
  Vector flat_grads() const;
  void set_flat_params(const Vector& flat);

  std::uint64_t digest() const;  // parameters only
};

// Activations recorded by a forward pass; consumed by backward.
struct Tape {
  Matrix input;                   // in x batch
  std::vector<Matrix> pre;        // per layer, out x batch
  std::vector<Matrix> post;       // per layer, out x batch
  bool empty() const { return pre.empty(); }
};

// Columns of x are samples. Records into tape when non-null.
Matrix mlp_forward(const ParamTree& params, const MlpSpec& spec, const Matrix& x,
                   Tape* tape = nullptr);

// Back-propagates upstream = dLoss/dOutput (out x batch). Parameter gradients
// are added into params.grads when accumulate is true. Returns dLoss/dInput.
Matrix mlp_backward(ParamTree& params, const MlpSpec& spec, const Tape& tape,
                    const Matrix& upstream, bool accumulate = true);

// Input gradient only; parameters and their gradients are not touched.
Matrix mlp_input_grad(const ParamTree& params, const MlpSpec& spec, const Tape& tape,
                      const Matrix& upstream);

// A network: spec plus parameters.
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, Rng& rng);  // uniform +-sqrt(6/(fan_in+fan_out)), zero biases

  const MlpSpec& spec() const { return spec_; }
  ParamTree& params() { return params_; }
  const ParamTree& params() const { return params_; }

  Matrix forward(const Matrix& x, Tape* tape = nullptr) const {
    return mlp_forward(params_, spec_, x, tape);
  }
  Vector forward_one(const Vector& x) const;
  Matrix backward(const Tape& tape, const Matrix& upstream, bool accumulate = true) {
    return mlp_backward(params_, spec_, tape, upstream, accumulate);
  }
  Matrix input_grad(const Tape& tape, const Matrix& upstream) const {
    return mlp_input_grad(params_, spec_, tape, upstream);
  }

 private:
  MlpSpec spec_;
  ParamTree params_;
};

}  // namespace lapal::nn
