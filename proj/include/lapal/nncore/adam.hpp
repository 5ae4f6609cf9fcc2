#pragma once

#include "lapal/nncore/mlp.hpp"

namespace lapal::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update from the accumulated gradients, which are
// zeroed afterwards. A non-finite gradient aborts the step with a NumericError
// naming the offending layer; parameters and moments are left untouched.
void adam_step(ParamTree& params, const AdamConfig& cfg);

// Scalar Adam state, used for the SAC entropy temperature.
struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  std::int64_t step = 0;

  double update(double value, double grad, const AdamConfig& cfg);
};

}  // namespace lapal::nn
