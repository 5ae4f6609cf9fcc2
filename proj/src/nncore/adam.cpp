#include "lapal/nncore/adam.hpp"

#include <cmath>
#include <sstream>

#include "lapal/common/errors.hpp"

namespace lapal::nn {

void adam_step(ParamTree& params, const AdamConfig& cfg) {
  for (std::size_t l = 0; l < params.grads.size(); ++l) {
    const auto& g = params.grads[l];
    if (!g.weights.allFinite() || !g.biases.allFinite()) {
      const auto bad_w = (!g.weights.array().isFinite()).count();
      const auto bad_b = (!g.biases.array().isFinite()).count();
      std::ostringstream os;
      os << "adam step aborted: layer " << l << " has " << bad_w << " non-finite weight and "
         << bad_b << " non-finite bias gradients (step " << params.adam_step << ")";
      throw NumericError(os.str());
    }
  }
  ++params.adam_step;
  const double t = static_cast<double>(params.adam_step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    auto& g = params.grads[l];
    auto& m = params.adam_m[l];
    auto& v = params.adam_v[l];

    m.weights = cfg.beta1 * m.weights + (1.0 - cfg.beta1) * g.weights;
    v.weights = cfg.beta2 * v.weights + (1.0 - cfg.beta2) * g.weights.cwiseAbs2();
    p.weights.array() -= cfg.lr * (m.weights.array() / c1) /
                         ((v.weights.array() / c2).sqrt() + cfg.eps);

    m.biases = cfg.beta1 * m.biases + (1.0 - cfg.beta1) * g.biases;
    v.biases = cfg.beta2 * v.biases + (1.0 - cfg.beta2) * g.biases.cwiseAbs2();
    p.biases.array() -= cfg.lr * (m.biases.array() / c1) /
                        ((v.biases.array() / c2).sqrt() + cfg.eps);
  }
  params.zero_grad();
}

double ScalarAdam::update(double value, double grad, const AdamConfig& cfg) {
  if (!std::isfinite(grad)) throw NumericError("non-finite scalar gradient");
  ++step;
  const double t = static_cast<double>(step);
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
  const double m_hat = m / (1.0 - std::pow(cfg.beta1, t));
  const double v_hat = v / (1.0 - std::pow(cfg.beta2, t));
  return value - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
}

}  // namespace lapal::nn
