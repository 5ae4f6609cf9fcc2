#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lapal/common/errors.hpp"
#include "lapal/nncore/adam.hpp"
#include "lapal/nncore/checkpoint.hpp"
#include "lapal/nncore/gaussian.hpp"
#include "lapal/nncore/mlp.hpp"
#include "test_util.hpp"

using namespace lapal;
using namespace lapal::nn;

namespace {

MlpSpec make_spec(int in, std::vector<int> hidden, int out, Activation act,
                  Activation out_act = Activation::kIdentity) {
  MlpSpec s;
  s.input_dim = in;
  s.hidden = std::move(hidden);
  s.output_dim = out;
  s.activation = act;
  s.output_activation = out_act;
  return s;
}

// Straight-line re-implementation of a dense forward pass, one scalar at a time.
Vector reference_forward(const ParamTree& p, const MlpSpec& spec, const Vector& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& W = p.layers[l].weights;
    const auto& b = p.layers[l].biases;
    std::vector<double> next(W.rows());
    const bool last = l + 1 == p.layers.size();
    const Activation act = last ? spec.output_activation : spec.activation;
    for (int r = 0; r < W.rows(); ++r) {
      double z = b(r);
      for (int c = 0; c < W.cols(); ++c) z += W(r, c) * h[c];
      switch (act) {
        case Activation::kRelu: z = z > 0 ? z : 0; break;
        case Activation::kLeakyRelu: z = z > 0 ? z : 0.01 * z; break;
        case Activation::kTanh: z = std::tanh(z); break;
        case Activation::kIdentity: break;
      }
      next[r] = z;
    }
    h = std::move(next);
  }
  return Eigen::Map<Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
}

}  // namespace

TEST(MlpForward, ZeroNetworkGivesZero) {
  const auto spec = make_spec(3, {5, 4}, 2, Activation::kRelu);
  ParamTree p = ParamTree::zeros_like(spec);
  Matrix x = Matrix::Random(3, 7);
  EXPECT_TRUE(mlp_forward(p, spec, x).isZero(0.0));
}

TEST(MlpForward, IdentityMapPassesInputThrough) {
  const auto spec = make_spec(2, {2}, 2, Activation::kIdentity);
  ParamTree p = ParamTree::zeros_like(spec);
  p.layers[0].weights.setIdentity();
  p.layers[1].weights.setIdentity();
  Vector x(2);
  x << 1.0, 2.0;
  Matrix out = mlp_forward(p, spec, Matrix(x));
  EXPECT_DOUBLE_EQ(out(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 2.0);
}

TEST(MlpForward, MatchesStraightLineOracle) {
  for (auto act : {Activation::kRelu, Activation::kLeakyRelu, Activation::kTanh}) {
    Rng rng(0);
    Mlp net(make_spec(1, {8}, 3, act), rng);
    Vector x(1);
    x << 0.5;
    const Vector got = net.forward_one(x);
    const Vector want = reference_forward(net.params(), net.spec(), x);
    ASSERT_EQ(got.size(), 3);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(got(i), want(i), 1e-14);
  }
}

TEST(MlpForward, ShapeMismatchIsConfigError) {
  Rng rng(1);
  Mlp net(make_spec(3, {4}, 1, Activation::kRelu), rng);
  EXPECT_THROW(net.forward(Matrix::Zero(2, 1)), ConfigError);
  ParamTree wrong = ParamTree::zeros_like(make_spec(3, {4, 4}, 1, Activation::kRelu));
  EXPECT_THROW(mlp_forward(wrong, net.spec(), Matrix::Zero(3, 1)), ConfigError);
}

TEST(MlpSpec, RejectsInvalidSpecs) {
  EXPECT_THROW(make_spec(2, {}, 1, Activation::kRelu).validate(), ConfigError);
  EXPECT_THROW(make_spec(0, {3}, 1, Activation::kRelu).validate(), ConfigError);
  EXPECT_THROW(make_spec(2, {3}, 1, Activation::kRelu, Activation::kRelu).validate(), ConfigError);
}

TEST(MlpForward, TanhOutputStrictlyInsideUnitBox) {
  Rng rng(2);
  Mlp net(make_spec(4, {16}, 3, Activation::kRelu, Activation::kTanh), rng);
  for (auto& l : net.params().layers) l.weights *= 200.0;
  const Matrix out = net.forward(Matrix::Random(4, 500) * 50.0);
  EXPECT_LT(out.cwiseAbs().maxCoeff(), 1.0);
}

TEST(MlpBackward, LinearCaseWeightGradIsOuterProduct) {
  const auto spec = make_spec(2, {2}, 2, Activation::kIdentity);
  ParamTree p = ParamTree::zeros_like(spec);
  p.layers[0].weights.setIdentity();
  p.layers[1].weights.setIdentity();
  Vector x(2);
  x << 0.3, -1.2;
  Tape tape;
  mlp_forward(p, spec, Matrix(x), &tape);
  mlp_backward(p, spec, tape, Matrix::Ones(2, 1));
  Matrix expected = Vector::Ones(2) * x.transpose();
  EXPECT_TRUE(p.grads[1].weights.isApprox(expected));
  EXPECT_TRUE(p.grads[1].biases.isApprox(Vector::Ones(2)));
}

TEST(MlpBackward, ZeroUpstreamAccumulatesNothing) {
  Rng rng(3);
  Mlp net(make_spec(3, {5, 5}, 2, Activation::kTanh), rng);
  Tape tape;
  net.forward(Matrix::Random(3, 4), &tape);
  const Matrix dx = net.backward(tape, Matrix::Zero(2, 4));
  EXPECT_TRUE(net.params().flat_grads().isZero(0.0));
  EXPECT_TRUE(dx.isZero(0.0));
}

TEST(MlpBackward, WithoutForwardIsStateError) {
  Rng rng(4);
  Mlp net(make_spec(3, {5}, 2, Activation::kRelu), rng);
  Tape empty;
  EXPECT_THROW(net.backward(empty, Matrix::Zero(2, 1)), StateError);
}

// Analytic gradients against central differences on 100 random probes per
// network shape: loss = sum(c .* f(x)) for random projection c.
TEST(MlpBackward, MatchesFiniteDifferences) {
  const std::vector<MlpSpec> specs = {
      make_spec(3, {6, 5}, 2, Activation::kTanh),
      make_spec(4, {7, 7}, 3, Activation::kLeakyRelu, Activation::kTanh),
      make_spec(5, {8, 8, 8}, 4, Activation::kRelu),
      make_spec(6, {6}, 1, Activation::kIdentity),
  };
  Rng rng(11);
  for (const auto& spec : specs) {
    Mlp net(spec, rng);
    for (auto& l : net.params().layers) l.biases = Vector::Random(l.biases.size()) * 0.3;
    const Matrix x = Matrix::Random(spec.input_dim, 5);
    const Matrix c = Matrix::Random(spec.output_dim, 5);
    Tape tape;
    net.forward(x, &tape);
    const Matrix dx = net.backward(tape, c);
    const Vector analytic = net.params().flat_grads();

    ParamTree probe = net.params();
    auto loss = [&](const Vector& flat) {
      probe.set_flat_params(flat);
      return (mlp_forward(probe, spec, x).array() * c.array()).sum();
    };
    const Vector base = net.params().flat_params();
    std::uniform_int_distribution<Eigen::Index> pick(0, base.size() - 1);
    for (int k = 0; k < 100; ++k) {
      const Eigen::Index i = pick(rng);
      Vector up = base, down = base;
      up(i) += 1e-5;
      down(i) -= 1e-5;
      const double numeric = (loss(up) - loss(down)) / 2e-5;
      EXPECT_LT(testutil::relative_error(analytic(i), numeric), 1e-4)
          << spec.describe() << " param " << i;
    }
    // Input gradient.
    auto loss_x = [&](const Vector& flat) {
      Matrix xx = Eigen::Map<const Matrix>(flat.data(), x.rows(), x.cols());
      return (net.forward(xx).array() * c.array()).sum();
    };
    const Vector xflat = Eigen::Map<const Vector>(x.data(), x.size());
    const Vector num_dx = testutil::numeric_gradient(loss_x, xflat);
    const Vector an_dx = Eigen::Map<const Vector>(dx.data(), dx.size());
    EXPECT_LT(testutil::max_relative_error(an_dx, num_dx), 1e-4) << spec.describe();
  }
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  ParamTree p;
  DenseLayer l{Matrix::Constant(1, 1, 2.0), Vector::Constant(1, -1.0)};
  p.layers = {l};
  p.grads = {DenseLayer{Matrix::Constant(1, 1, 0.37), Vector::Constant(1, -4.0)}};
  p.adam_m = p.adam_v = {DenseLayer{Matrix::Zero(1, 1), Vector::Zero(1)}};
  adam_step(p, AdamConfig{0.01});
  EXPECT_NEAR(p.layers[0].weights(0, 0), 2.0 - 0.01, 1e-9);
  EXPECT_NEAR(p.layers[0].biases(0), -1.0 + 0.01, 1e-9);
  EXPECT_TRUE(p.flat_grads().isZero(0.0));
}

TEST(Adam, ZeroGradientLeavesFreshParametersAndDecaysMoments) {
  Rng rng(5);
  Mlp net(make_spec(2, {3}, 1, Activation::kRelu), rng);
  const Vector before = net.params().flat_params();
  adam_step(net.params(), AdamConfig{0.1});
  EXPECT_EQ(before, net.params().flat_params());

  net.params().grads[0].weights.setConstant(1.0);
  adam_step(net.params(), AdamConfig{0.1});
  const double m1 = net.params().adam_m[0].weights(0, 0);
  const double v1 = net.params().adam_v[0].weights(0, 0);
  adam_step(net.params(), AdamConfig{0.1});
  EXPECT_DOUBLE_EQ(net.params().adam_m[0].weights(0, 0), 0.9 * m1);
  EXPECT_DOUBLE_EQ(net.params().adam_v[0].weights(0, 0), 0.999 * v1);
}

TEST(Adam, ConvergesOnQuadraticBowl) {
  ParamTree p;
  p.layers = {DenseLayer{Matrix::Zero(1, 1), Vector::Zero(1)}};
  p.grads = p.adam_m = p.adam_v = p.layers;
  for (int i = 0; i < 200; ++i) {
    const double theta = p.layers[0].weights(0, 0);
    p.grads[0].weights(0, 0) = 2.0 * (theta - 3.0);
    adam_step(p, AdamConfig{0.1});
  }
  EXPECT_LT(std::abs(p.layers[0].weights(0, 0) - 3.0), 0.05);
}

TEST(Adam, NonFiniteGradientAbortsWithoutTouchingParameters) {
  Rng rng(6);
  Mlp net(make_spec(2, {3}, 1, Activation::kRelu), rng);
  const Vector before = net.params().flat_params();
  net.params().grads[1].biases(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(adam_step(net.params(), AdamConfig{}), NumericError);
  EXPECT_EQ(before, net.params().flat_params());
  EXPECT_EQ(net.params().adam_step, 0);
}

TEST(Adam, MomentsStayFiniteOverManySteps) {
  Rng rng(7);
  Mlp net(make_spec(2, {4}, 1, Activation::kTanh), rng);
  for (int i = 0; i < 500; ++i) {
    Tape t;
    net.forward(Matrix::Random(2, 3) * 1e3, &t);
    net.backward(t, Matrix::Constant(1, 3, 1e6));
    adam_step(net.params(), AdamConfig{});
  }
  for (std::size_t l = 0; l < net.params().layers.size(); ++l) {
    EXPECT_TRUE(net.params().adam_m[l].weights.allFinite());
    EXPECT_TRUE(net.params().adam_v[l].weights.allFinite());
  }
}

TEST(Determinism, SameSeedSameParametersAfterTraining) {
  auto train = [] {
    Rng rng(42);
    Mlp net(make_spec(3, {8, 8}, 2, Activation::kRelu), rng);
    for (int i = 0; i < 50; ++i) {
      Matrix x = standard_normal(3, 16, rng);
      Tape t;
      Matrix y = net.forward(x, &t);
      net.backward(t, y);  // loss = 0.5 |y|^2
      adam_step(net.params(), AdamConfig{1e-3});
    }
    return net.params().flat_params();
  };
  const Vector a = train();
  const Vector b = train();
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), sizeof(double) * a.size()));
}

TEST(Gaussian, SampleWithZeroNoiseIsMean) {
  Vector mu(3);
  mu << 0.1, -2.0, 5.0;
  auto d = make_gaussian(mu, Vector::Constant(3, 0.7));
  EXPECT_EQ(gaussian_sample(d, Vector::Zero(3)), mu);
}

TEST(Gaussian, UnitStdShiftsByNoise) {
  Vector mu(2), noise(2);
  mu << 0.5, 0.25;
  noise << 1.0, -1.0;
  auto d = make_gaussian(mu, Vector::Zero(2));
  Vector s = gaussian_sample(d, noise);
  EXPECT_DOUBLE_EQ(s(0), 1.5);
  EXPECT_DOUBLE_EQ(s(1), -0.75);
}

TEST(Gaussian, MonteCarloMeanWithinThreeStandardErrors) {
  Vector mu(2), ls(2);
  mu << 1.5, -0.3;
  ls << std::log(0.5), std::log(2.0);
  auto d = make_gaussian(mu, ls);
  Rng rng(8);
  const int n = 100000;
  const Matrix noise = standard_normal(2, n, rng);
  Vector sum = Vector::Zero(2);
  for (int i = 0; i < n; ++i) sum += gaussian_sample(d, noise.col(i));
  const Vector mean = sum / n;
  for (int i = 0; i < 2; ++i) {
    EXPECT_LT(std::abs(mean(i) - mu(i)), 3.0 * d.stddev()(i) / std::sqrt(double(n)));
  }
}

TEST(Gaussian, LogStdIsClamped) {
  auto d = make_gaussian(Vector::Zero(2), Vector::Constant(2, 50.0));
  EXPECT_EQ(d.log_std(0), kLogStdMax);
  d = make_gaussian(Vector::Zero(2), Vector::Constant(2, -50.0));
  EXPECT_EQ(d.log_std(1), kLogStdMin);
  EXPECT_GT(d.stddev().minCoeff(), 0.0);
  EXPECT_TRUE(std::isfinite(gaussian_log_prob(d, Vector::Constant(2, 1e3))));
}

TEST(GaussianKl, ClosedFormCases) {
  EXPECT_EQ(gaussian_kl_to_standard(make_gaussian(Vector::Zero(3), Vector::Zero(3))), 0.0);
  EXPECT_DOUBLE_EQ(gaussian_kl_to_standard(make_gaussian(Vector::Ones(1), Vector::Zero(1))), 0.5);
}

TEST(GaussianKl, NonNegativeAndZeroOnlyAtPrior) {
  Rng rng(9);
  for (int k = 0; k < 2000; ++k) {
    Vector mu = standard_normal(4, 1, rng) * 3.0;
    Vector ls = standard_normal(4, 1, rng) * 2.0;
    EXPECT_GT(gaussian_kl_to_standard(make_gaussian(mu, ls)), 0.0);
  }
}

TEST(GaussianKl, MatchesMonteCarloEstimate) {
  Vector mu(3), ls(3);
  mu << 0.8, -0.4, 1.2;
  ls << std::log(0.6), std::log(1.3), std::log(0.9);
  auto d = make_gaussian(mu, ls);
  auto prior = make_gaussian(Vector::Zero(3), Vector::Zero(3));
  Rng rng(10);
  const int n = 1000000;
  double acc = 0.0;
  std::normal_distribution<double> normal;
  Vector z(3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) z(j) = normal(rng);
    const Vector x = gaussian_sample(d, z);
    acc += gaussian_log_prob(d, x) - gaussian_log_prob(prior, x);
  }
  const double mc = acc / n;
  const double exact = gaussian_kl_to_standard(d);
  EXPECT_LT(std::abs(mc - exact) / exact, 0.01);
}

TEST(StableMath, SoftplusAndTanhCorrection) {
  EXPECT_NEAR(softplus(0.0), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(softplus(-20.0), 2.0611536203143807e-09, 1e-22);
  EXPECT_TRUE(std::isfinite(softplus(800.0)));
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  for (double x : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
    EXPECT_NEAR(log1m_tanh_sq(x), std::log(1.0 - std::tanh(x) * std::tanh(x)), 1e-12);
  }
  EXPECT_TRUE(std::isfinite(log1m_tanh_sq(400.0)));
}

TEST(Checkpoint, SegmentRoundTripsAndRejectsForeignSpec) {
  Rng rng(12);
  Mlp net(make_spec(3, {4, 4}, 2, Activation::kTanh), rng);
  net.params().grads[0].weights.setConstant(0.5);
  adam_step(net.params(), AdamConfig{});
  BinaryWriter w;
  write_segment(w, net);

  Rng other(13);
  Mlp copy(net.spec(), other);
  BinaryReader r(w.data());
  read_segment(r, copy);
  EXPECT_TRUE(r.at_end());
  EXPECT_EQ(copy.params().digest(), net.params().digest());
  EXPECT_EQ(copy.params().adam_step, 1);
  EXPECT_EQ(copy.params().adam_v[0].weights, net.params().adam_v[0].weights);

  Mlp foreign(make_spec(3, {4, 5}, 2, Activation::kTanh), other);
  BinaryReader r2(w.data());
  EXPECT_THROW(read_segment(r2, foreign), IoError);
}
