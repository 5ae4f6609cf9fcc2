#include "lapal/nncore/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "lapal/common/errors.hpp"

namespace lapal::nn {

GaussianDist make_gaussian(Eigen::VectorXd mean, Eigen::VectorXd log_std) {
  if (mean.size() != log_std.size()) throw ConfigError("gaussian mean/log_std size mismatch");
  return GaussianDist{std::move(mean), log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax)};
}

Eigen::VectorXd gaussian_sample(const GaussianDist& d, const Eigen::VectorXd& noise) {
  if (noise.size() != d.mean.size()) throw ConfigError("gaussian noise size mismatch");
  return d.mean + d.stddev().cwiseProduct(noise);
}

double gaussian_log_prob(const GaussianDist& d, const Eigen::VectorXd& x) {
  if (x.size() != d.mean.size()) throw ConfigError("gaussian sample size mismatch");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double z = (x(i) - d.mean(i)) * std::exp(-d.log_std(i));
    lp += -0.5 * z * z - d.log_std(i) - half_log_2pi;
  }
  return lp;
}

double gaussian_kl_to_standard(const GaussianDist& d) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < d.mean.size(); ++i) {
    const double ls = d.log_std(i);
    kl += 0.5 * (d.mean(i) * d.mean(i) + std::exp(2.0 * ls) - 1.0 - 2.0 * ls);
  }
  return kl;
}

Eigen::RowVectorXd gaussian_kl_to_standard_cols(const Eigen::MatrixXd& mean,
                                                const Eigen::MatrixXd& log_std) {
  const Eigen::ArrayXXd terms =
      0.5 * (mean.array().square() + (2.0 * log_std.array()).exp() - 1.0 - 2.0 * log_std.array());
  return terms.colwise().sum().matrix();
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1m_tanh_sq(double x) {
  return 2.0 * (std::numbers::ln2 - x - softplus(-2.0 * x));
}

Eigen::MatrixXd softplus(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return softplus(v); });
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace lapal::nn
