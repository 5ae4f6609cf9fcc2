#pragma once

#include <Eigen/Dense>

namespace lapal::nn {

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

// Diagonal Gaussian. log_std is always within [kLogStdMin, kLogStdMax] when
// built through make_gaussian.
struct GaussianDist {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;

  Eigen::VectorXd stddev() const { return log_std.array().exp().matrix(); }
};

GaussianDist make_gaussian(Eigen::VectorXd mean, Eigen::VectorXd log_std);

// Reparameterized draw: mean + exp(log_std) * noise.
Eigen::VectorXd gaussian_sample(const GaussianDist& d, const Eigen::VectorXd& noise);

double gaussian_log_prob(const GaussianDist& d, const Eigen::VectorXd& x);

// KL(d || N(0, I)) = sum 0.5 (mu^2 + sigma^2 - 1 - log sigma^2).
double gaussian_kl_to_standard(const GaussianDist& d);

// Column-wise KL(N(mean, exp(log_std)^2) || N(0, I)); returns one value per column.
Eigen::RowVectorXd gaussian_kl_to_standard_cols(const Eigen::MatrixXd& mean,
                                                const Eigen::MatrixXd& log_std);

// Numerically stable scalar helpers shared by the adversary and SAC.
double softplus(double x);
double sigmoid(double x);
// log(1 - tanh(x)^2), stable for large |x|.
double log1m_tanh_sq(double x);

Eigen::MatrixXd softplus(const Eigen::MatrixXd& x);
Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x);

}  // namespace lapal::nn
